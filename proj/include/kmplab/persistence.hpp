#pragma once

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmplab/kmp_engine.hpp"

namespace kmplab {

// Container tag stored after the magic bytes.
enum class ContainerKind : std::uint32_t { LatticeTrajectory = 0, GridFieldSeries = 1 };

namespace io {

template <class T>
void put_le(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  unsigned char b[sizeof(T)];
  is.read(reinterpret_cast<char*>(b), sizeof(T));
  if (!is) throw std::runtime_error("truncated container");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

// Shortest round-trip decimal form.
inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace io

struct ContainerHeader {
  ContainerKind kind = ContainerKind::LatticeTrajectory;
  std::uint32_t d = 1;
  std::uint32_t N = 1;
  std::uint32_t components = 1;
  double T = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t snapshots = 0;
  std::uint64_t flux_events = 0;
};

inline void write_header(std::ostream& os, const ContainerHeader& h) {
  os.write("KMP1", 4);
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(h.kind));
  io::put_le<std::uint32_t>(os, h.d);
  io::put_le<std::uint32_t>(os, h.N);
  io::put_le<std::uint32_t>(os, h.components);
  io::put_le<double>(os, h.T);
  io::put_le<std::uint64_t>(os, h.seed);
  io::put_le<std::uint64_t>(os, h.snapshots);
  io::put_le<std::uint64_t>(os, h.flux_events);
}

inline ContainerHeader read_header(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "KMP1", 4) != 0) throw std::runtime_error("not a KMP1 container");
  ContainerHeader h;
  h.kind = static_cast<ContainerKind>(io::get_le<std::uint32_t>(is));
  h.d = io::get_le<std::uint32_t>(is);
  h.N = io::get_le<std::uint32_t>(is);
  h.components = io::get_le<std::uint32_t>(is);
  h.T = io::get_le<double>(is);
  h.seed = io::get_le<std::uint64_t>(is);
  h.snapshots = io::get_le<std::uint64_t>(is);
  h.flux_events = io::get_le<std::uint64_t>(is);
  return h;
}

inline void write_trajectory(std::ostream& os, const TrajectoryRecord& rec) {
  ContainerHeader h;
  h.kind = ContainerKind::LatticeTrajectory;
  h.d = static_cast<std::uint32_t>(rec.lattice.d());
  h.N = static_cast<std::uint32_t>(rec.lattice.N());
  h.T = rec.T;
  h.seed = rec.seed;
  h.snapshots = rec.snapshots.size();
  h.flux_events = rec.has_flux ? rec.flux.size() : 0;
  write_header(os, h);
  for (std::size_t i = 0; i < rec.snapshots.size(); ++i) {
    io::put_le<double>(os, rec.times[i]);
    for (double v : rec.snapshots[i].values()) io::put_le<double>(os, v);
  }
  for (std::size_t i = 0; i < h.flux_events; ++i) {
    io::put_le<double>(os, rec.flux[i].t);
    io::put_le<std::uint64_t>(os, rec.flux[i].edge);
    io::put_le<double>(os, rec.flux[i].p);
  }
}

inline TrajectoryRecord read_trajectory(std::istream& is) {
  ContainerHeader h = read_header(is);
  if (h.kind != ContainerKind::LatticeTrajectory) throw std::runtime_error("container does not hold a trajectory");
  TrajectoryRecord rec;
  rec.lattice = Lattice(static_cast<int>(h.d), static_cast<int>(h.N));
  rec.T = h.T;
  rec.seed = h.seed;
  std::size_t n = rec.lattice.site_count();
  for (std::uint64_t s = 0; s < h.snapshots; ++s) {
    rec.times.push_back(io::get_le<double>(is));
    std::vector<double> e(n);
    for (auto& v : e) v = io::get_le<double>(is);
    rec.snapshots.emplace_back(rec.lattice, std::move(e));
  }
  rec.has_flux = h.flux_events > 0;
  for (std::uint64_t i = 0; i < h.flux_events; ++i) {
    FluxEvent f;
    f.t = io::get_le<double>(is);
    f.edge = io::get_le<std::uint64_t>(is);
    f.p = io::get_le<double>(is);
    rec.flux.push_back(f);
  }
  if (!rec.snapshots.empty()) rec.initial = rec.snapshots.front();
  // every event is in the flux record; without it the count is not stored
  rec.events = rec.flux.size();
  return rec;
}

inline void save_trajectory(const std::string& path, const TrajectoryRecord& rec) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  write_trajectory(os, rec);
}

inline TrajectoryRecord load_trajectory(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_trajectory(is);
}

// Long-format CSV: t, i0[, i1[, i2]], energy
inline void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& rec) {
  const Lattice& lat = rec.lattice;
  os << "t";
  for (int i = 0; i < lat.d(); ++i) os << ",i" << i;
  os << ",energy\r\n";
  for (std::size_t s = 0; s < rec.snapshots.size(); ++s) {
    for (std::size_t x = 0; x < lat.site_count(); ++x) {
      auto c = lat.coords(x);
      os << io::fmt(rec.times[s]);
      for (int i = 0; i < lat.d(); ++i) os << ',' << c[i];
      os << ',' << io::fmt(rec.snapshots[s][x]) << "\r\n";
    }
  }
}

inline void write_flux_csv(std::ostream& os, const TrajectoryRecord& rec) {
  os << "t,edge_id,p\r\n";
  for (const auto& f : rec.flux) os << io::fmt(f.t) << ',' << f.edge << ',' << io::fmt(f.p) << "\r\n";
}

}  // namespace kmplab
