#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmplab/common.hpp"
#include "kmplab/spectral.hpp"

namespace kmplab {

struct Edge {
  std::size_t x = 0;  // tail
  std::size_t y = 0;  // head, x + e_dir
  int dir = 0;
};

// Discrete torus (Z/NZ)^d with sites indexed coordinate-0-fastest and edges
// oriented in the positive coordinate direction: edge id = site * d + dir.
class Lattice {
 public:
  Lattice() = default;
  Lattice(int d, int N) : d_(d), N_(N) {
    if (d < 1 || d > 3) throw std::invalid_argument("lattice dimension must be 1, 2 or 3");
    if (N < 1) throw std::invalid_argument("lattice side must be positive");
    if (N == 2) throw std::invalid_argument("N=2 gives double edges between the same pair; use N=1 or N>=3");
    sites_ = ipow(static_cast<std::size_t>(N), d);
    edges_ = N == 1 ? 0 : static_cast<std::size_t>(d) * sites_;
  }

  int d() const { return d_; }
  int N() const { return N_; }
  std::size_t site_count() const { return sites_; }
  std::size_t edge_count() const { return edges_; }
  double spacing() const { return 1.0 / N_; }

  std::array<int, 3> coords(std::size_t site) const { return unflatten(site, d_, N_); }
  std::size_t site(const std::array<int, 3>& c) const { return flatten(c, d_, N_); }

  Point position(std::size_t site) const {
    auto c = coords(site);
    Point p{0.0, 0.0, 0.0};
    for (int i = 0; i < d_; ++i) p[i] = static_cast<double>(c[i]) / N_;
    return p;
  }

  std::size_t shift(std::size_t site, int dir, int step) const {
    auto c = coords(site);
    c[dir] = ((c[dir] + step) % N_ + N_) % N_;
    return this->site(c);
  }

  Edge edge(std::size_t id) const {
    Edge e;
    e.x = id / static_cast<std::size_t>(d_);
    e.dir = static_cast<int>(id % static_cast<std::size_t>(d_));
    e.y = shift(e.x, e.dir, 1);
    return e;
  }

  // Midpoint of an edge on the unit torus.
  Point midpoint(std::size_t id) const {
    Edge e = edge(id);
    Point p = position(e.x);
    p[e.dir] = wrap01(p[e.dir] + 0.5 / N_);
    return p;
  }

  bool operator==(const Lattice& o) const { return d_ == o.d_ && N_ == o.N_; }
  bool operator!=(const Lattice& o) const { return !(*this == o); }

 private:
  int d_ = 1;
  int N_ = 1;
  std::size_t sites_ = 1;
  std::size_t edges_ = 0;
};

class EnergyConfig {
 public:
  EnergyConfig() = default;
  EnergyConfig(Lattice lat, std::vector<double> e) : lat_(lat), e_(std::move(e)) {
    if (e_.size() != lat_.site_count()) throw std::invalid_argument("energy array does not match lattice");
    for (double v : e_)
      if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("energies must be finite and nonnegative");
  }
  EnergyConfig(Lattice lat, double c) : EnergyConfig(lat, std::vector<double>(lat.site_count(), c)) {}

  const Lattice& lattice() const { return lat_; }
  const std::vector<double>& values() const { return e_; }
  std::vector<double>& mutable_values() { return e_; }
  double operator[](std::size_t i) const { return e_[i]; }
  double& operator[](std::size_t i) { return e_[i]; }
  std::size_t size() const { return e_.size(); }

  double total() const {
    double s = 0.0;
    for (double v : e_) s += v;
    return s;
  }
  // <1, pi_N(xi)> = N^{-d} sum xi
  double mass() const { return total() / static_cast<double>(lat_.site_count()); }
  // ||xi||^2 in L^2_N
  double l2_squared() const {
    double s = 0.0;
    for (double v : e_) s += v * v;
    return s / static_cast<double>(lat_.site_count());
  }

 private:
  Lattice lat_;
  std::vector<double> e_;
};

inline void check_size(const std::vector<double>& f, const Lattice& lat) {
  if (f.size() != lat.site_count()) throw std::invalid_argument("site function does not match lattice");
}

// (Delta_N f)(x) = N^2 sum_{y~x} (f(y) - f(x))
inline std::vector<double> discrete_laplacian(const std::vector<double>& f, const Lattice& lat) {
  check_size(f, lat);
  std::vector<double> out(f.size(), 0.0);
  if (lat.edge_count() == 0) return out;
  const double n2 = static_cast<double>(lat.N()) * lat.N();
  for (std::size_t id = 0; id < lat.edge_count(); ++id) {
    Edge e = lat.edge(id);
    double diff = f[e.y] - f[e.x];
    out[e.x] += n2 * diff;
    out[e.y] -= n2 * diff;
  }
  return out;
}

inline int box_half_width(const Lattice& lat, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("averaging radius must be positive");
  int k = static_cast<int>(std::floor(lat.N() * eps));
  if (2 * k + 1 > lat.N()) throw std::invalid_argument("averaging box exceeds the torus");
  return k;
}

// Mean of xi over the periodic box of side 2*floor(N eps)+1 centred at x.
inline double local_average(const EnergyConfig& xi, double eps, std::size_t x) {
  const Lattice& lat = xi.lattice();
  int k = box_half_width(lat, eps);
  int d = lat.d();
  auto c0 = lat.coords(x);
  int side = 2 * k + 1;
  std::size_t count = ipow(static_cast<std::size_t>(side), d);
  double s = 0.0;
  for (std::size_t j = 0; j < count; ++j) {
    auto off = unflatten(j, d, side);
    std::array<int, 3> c{0, 0, 0};
    for (int i = 0; i < d; ++i) c[i] = ((c0[i] + off[i] - k) % lat.N() + lat.N()) % lat.N();
    s += xi[lat.site(c)];
  }
  return s / static_cast<double>(count);
}

// Box averages at every site by separable running sums.
inline std::vector<double> local_average_all(const EnergyConfig& xi, double eps) {
  const Lattice& lat = xi.lattice();
  int k = box_half_width(lat, eps);
  std::vector<double> cur = xi.values();
  std::vector<double> next(cur.size());
  for (int dir = 0; dir < lat.d(); ++dir) {
    for (std::size_t s = 0; s < cur.size(); ++s) {
      double acc = 0.0;
      for (int o = -k; o <= k; ++o) acc += cur[lat.shift(s, dir, o)];
      next[s] = acc / (2 * k + 1);
    }
    std::swap(cur, next);
  }
  return cur;
}

// Translation-invariant Green kernel of (-Delta_N + 1) with source N^d delta_0.
class GreenKernel {
 public:
  GreenKernel() = default;
  explicit GreenKernel(const Lattice& lat) : lat_(lat) {
    const int d = lat.d(), N = lat.N();
    const std::size_t n = lat.site_count();
    symbol_.resize(n);
    const double n2 = static_cast<double>(N) * N;
    for (std::size_t idx = 0; idx < n; ++idx) {
      auto c = unflatten(idx, d, N);
      double lam = 0.0;
      if (N > 1)
        for (int i = 0; i < d; ++i) lam += 2.0 * n2 * (1.0 - std::cos(kTwoPi * c[i] / N));
      symbol_[idx] = 1.0 / (1.0 + lam);
    }
    // G(x) = sum_k e^{2 pi i k.x/N} / (1 + lambda_k)
    std::vector<cplx> buf(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = symbol_[i];
    fft_backward(d, N, buf);
    values_.resize(n);
    for (std::size_t i = 0; i < n; ++i) values_[i] = buf[i].real();
  }

  const Lattice& lattice() const { return lat_; }
  const std::vector<double>& values() const { return values_; }
  double at(std::size_t site) const { return values_[site]; }
  double at_origin() const { return values_[0]; }
  // Gamma_N = G(0) - G(e_1/N)
  double gamma() const {
    if (lat_.N() == 1) return 0.0;
    return values_[0] - values_[lat_.shift(0, 0, 1)];
  }
  // 1/(1+lambda_k) per Fourier index.
  const std::vector<double>& symbol() const { return symbol_; }

  // psi(x) = N^{-d} sum_y G(x-y) f(y), by spectral convolution.
  std::vector<double> apply(const std::vector<double>& f) const {
    check_size(f, lat_);
    const std::size_t n = f.size();
    std::vector<cplx> buf(f.begin(), f.end());
    fft_forward(lat_.d(), lat_.N(), buf);
    for (std::size_t i = 0; i < n; ++i) buf[i] *= symbol_[i] / static_cast<double>(n);
    fft_backward(lat_.d(), lat_.N(), buf);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = buf[i].real();
    return out;
  }

  // <f, G g>_N = N^{-2d} sum_{x,y} G(x-y) f(x) g(y)
  double quadratic_form(const std::vector<double>& f) const {
    check_size(f, lat_);
    const std::size_t n = f.size();
    std::vector<cplx> buf(f.begin(), f.end());
    fft_forward(lat_.d(), lat_.N(), buf);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::norm(buf[i]) * symbol_[i];
    return s / (static_cast<double>(n) * static_cast<double>(n));
  }

 private:
  Lattice lat_;
  std::vector<double> values_;
  std::vector<double> symbol_;
};

inline GreenKernel green_kernel(const Lattice& lat) { return GreenKernel(lat); }

// F_N(xi) = <xi, G_N xi>_N
inline double lyapunov_F(const EnergyConfig& xi, const GreenKernel& G) {
  if (xi.lattice() != G.lattice()) throw std::invalid_argument("configuration and kernel live on different lattices");
  return G.quadratic_form(xi.values());
}

}  // namespace kmplab
