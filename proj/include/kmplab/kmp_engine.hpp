#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "kmplab/common.hpp"
#include "kmplab/rng.hpp"
#include "kmplab/torus_lattice.hpp"

namespace kmplab {

using Profile = std::function<double(const Point&)>;

enum class EquilibriumKind { Global, Profile, Conditioned };

struct EquilibriumSpec {
  EquilibriumKind kind = EquilibriumKind::Global;
  double rho = 1.0;
  Profile u;
  double a = 0.0;

  static EquilibriumSpec global(double rho) {
    EquilibriumSpec s;
    s.kind = EquilibriumKind::Global;
    s.rho = rho;
    return s;
  }
  static EquilibriumSpec profile(Profile u) {
    EquilibriumSpec s;
    s.kind = EquilibriumKind::Profile;
    s.u = std::move(u);
    return s;
  }
  static EquilibriumSpec conditioned(Profile u, double a) {
    EquilibriumSpec s;
    s.kind = EquilibriumKind::Conditioned;
    s.u = std::move(u);
    s.a = a;
    return s;
  }
};

// Site means u(x/N) (or rho) of an equilibrium description on this lattice.
inline std::vector<double> equilibrium_means(const EquilibriumSpec& spec, const Lattice& lat) {
  std::vector<double> m(lat.site_count());
  for (std::size_t x = 0; x < m.size(); ++x) {
    double v = spec.kind == EquilibriumKind::Global ? spec.rho : spec.u(lat.position(x));
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("equilibrium profile must be finite and nonnegative");
    m[x] = v;
  }
  return m;
}

inline void validate(const EquilibriumSpec& spec, const Lattice& lat) {
  switch (spec.kind) {
    case EquilibriumKind::Global:
      if (!(spec.rho > 0.0)) throw std::invalid_argument("global equilibrium needs rho > 0");
      break;
    case EquilibriumKind::Profile:
      if (!spec.u) throw std::invalid_argument("profile equilibrium needs a profile");
      break;
    case EquilibriumKind::Conditioned: {
      if (!spec.u) throw std::invalid_argument("conditioned equilibrium needs a profile");
      auto m = equilibrium_means(spec, lat);
      double mass = 0.0;
      for (double v : m) mass += v;
      mass /= static_cast<double>(m.size());
      if (!(spec.a > mass)) throw std::invalid_argument("mass cap a must exceed <1,u>");
      break;
    }
  }
}

// Product of exponentials with means u(x); the conditioned kind rejects
// samples with N^{-d} sum xi > a.
inline EnergyConfig sample_equilibrium(const EquilibriumSpec& spec, const Lattice& lat, std::uint64_t seed,
                                       std::size_t max_attempts = 1000000) {
  validate(spec, lat);
  auto means = equilibrium_means(spec, lat);
  Rng rng(seed, 0x5eed5a11ULL);
  std::vector<double> e(lat.site_count());
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    double total = 0.0;
    for (std::size_t x = 0; x < e.size(); ++x) {
      e[x] = means[x] > 0.0 ? rng.exponential(means[x]) : 0.0;
      total += e[x];
    }
    if (spec.kind != EquilibriumKind::Conditioned || total / static_cast<double>(e.size()) <= spec.a)
      return EnergyConfig(lat, e);
  }
  throw BudgetExceeded("conditioned equilibrium sampler exhausted its attempts");
}

// Redistribution xi(x) <- p s, xi(y) <- (1-p) s with s = xi(x)+xi(y).
// The larger share is rounded first so the pair sum is preserved bit-exactly.
inline void apply_jump_inplace(std::vector<double>& xi, const Edge& e, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("redistribution fraction must lie in [0,1]");
  double s = xi[e.x] + xi[e.y];
  if (p >= 0.5) {
    double a = p * s;
    xi[e.x] = a;
    xi[e.y] = s - a;
  } else {
    double b = (1.0 - p) * s;
    xi[e.y] = b;
    xi[e.x] = s - b;
  }
}

inline EnergyConfig apply_jump(const EnergyConfig& xi, std::size_t edge_id, double p) {
  const Lattice& lat = xi.lattice();
  if (edge_id >= lat.edge_count()) throw std::invalid_argument("edge id out of range");
  EnergyConfig out = xi;
  apply_jump_inplace(out.mutable_values(), lat.edge(edge_id), p);
  return out;
}

struct FluxEvent {
  double t = 0.0;
  std::uint64_t edge = 0;
  double p = 0.0;
};

struct TrajectoryRecord {
  Lattice lattice;
  double T = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> times;
  std::vector<EnergyConfig> snapshots;
  bool has_flux = false;
  std::vector<FluxEvent> flux;
  EnergyConfig initial;
  std::uint64_t events = 0;

  // Largest relative deviation of the total energy from the initial total.
  double max_energy_drift() const {
    double e0 = initial.total();
    double worst = 0.0;
    for (const auto& s : snapshots) {
      double rel = e0 > 0.0 ? std::abs(s.total() - e0) / e0 : std::abs(s.total());
      worst = std::max(worst, rel);
    }
    return worst;
  }
};

struct SimulateOptions {
  double T = 0.0;
  std::vector<double> snapshot_times;  // empty: {0, T}
  std::uint64_t seed = 0;
  bool record_flux = false;
  double event_budget = 5e8;
  double rate_scale = 1.0;  // 0 freezes the dynamics
};

inline std::vector<double> normalized_snapshot_times(std::vector<double> ts, double T) {
  if (ts.empty()) ts = {0.0, T};
  std::sort(ts.begin(), ts.end());
  for (double t : ts)
    if (t < 0.0 || t > T) throw std::invalid_argument("snapshot time outside [0,T]");
  return ts;
}

inline double expected_events(const Lattice& lat, double T, double rate_scale = 1.0) {
  double n2 = static_cast<double>(lat.N()) * lat.N();
  return rate_scale * static_cast<double>(lat.edge_count()) * n2 * T;
}

// Untilted KMP dynamics: rate N^2 per edge, sampled by a global clock of
// rate d N^{d+2} with a uniformly chosen edge.
inline TrajectoryRecord simulate(const EnergyConfig& xi0, const SimulateOptions& opt) {
  const Lattice& lat = xi0.lattice();
  if (!(opt.T >= 0.0)) throw std::invalid_argument("horizon must be nonnegative");
  double expected = expected_events(lat, opt.T, opt.rate_scale);
  if (expected > opt.event_budget) throw BudgetExceeded("expected event count exceeds the configured budget");

  TrajectoryRecord rec;
  rec.lattice = lat;
  rec.T = opt.T;
  rec.seed = opt.seed;
  rec.initial = xi0;
  rec.has_flux = opt.record_flux;
  rec.times = normalized_snapshot_times(opt.snapshot_times, opt.T);

  std::vector<double> xi = xi0.values();
  const double total_rate = opt.rate_scale * static_cast<double>(lat.edge_count()) * lat.N() * lat.N();
  Rng rng(opt.seed, 0x6b6d70ULL);
  std::size_t next_snap = 0;
  double t = 0.0;
  auto flush = [&](double upto, bool inclusive) {
    while (next_snap < rec.times.size() &&
           (inclusive ? rec.times[next_snap] <= upto : rec.times[next_snap] < upto)) {
      rec.snapshots.emplace_back(lat, xi);
      ++next_snap;
    }
  };
  if (total_rate > 0.0) {
    const std::uint64_t E = lat.edge_count();
    while (true) {
      t += rng.exponential(1.0 / total_rate);
      if (t > opt.T) break;
      flush(t, false);
      std::uint64_t id = rng.below(E);
      double p = rng.uniform();
      apply_jump_inplace(xi, lat.edge(id), p);
      ++rec.events;
      if (opt.record_flux) rec.flux.push_back({t, id, p});
    }
  }
  flush(opt.T, true);
  return rec;
}

// Atoms of weight N^{-d} xi(x) at the lattice points x/N.
inline std::vector<Atom> empirical_measure(const EnergyConfig& xi) {
  const Lattice& lat = xi.lattice();
  std::vector<Atom> atoms(lat.site_count());
  double w = 1.0 / static_cast<double>(lat.site_count());
  for (std::size_t x = 0; x < atoms.size(); ++x) atoms[x] = {lat.position(x), w * xi[x]};
  return atoms;
}

template <class F>
double pair_with(const std::vector<Atom>& mu, F&& f) {
  double s = 0.0;
  for (const auto& a : mu) s += a.w * f(a.x);
  return s;
}

}  // namespace kmplab
