#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmplab/common.hpp"
#include "kmplab/cost_functionals.hpp"
#include "kmplab/cutoff_moments.hpp"
#include "kmplab/kmp_engine.hpp"
#include "kmplab/metrics.hpp"
#include "kmplab/quadrature.hpp"
#include "kmplab/tilt_engine.hpp"
#include "kmplab/torus_lattice.hpp"

namespace kmplab {

// ---- local functionals ----

// (aB + bA)/6 - (bB + aA)/3 with A = a^K, B = b^K
inline double psiK(double a, double b, double K) {
  double A = truncate(a, K), B = truncate(b, K);
  return (a * B + b * A) / 6.0 - (b * B + a * A) / 3.0;
}

// (A^2 - AB + B^2)/3
inline double upsilonK(double a, double b, double K) {
  double A = truncate(a, K), B = truncate(b, K);
  return (A * A - A * B + B * B) / 3.0;
}

// Defining p-integrals, for cross-checks.
inline double psiK_quadrature(double a, double b, double K, int nodes = 64) {
  double A = truncate(a, K), B = truncate(b, K);
  return integrate_gl([&](double p) { return (p * B - (1 - p) * A) * ((1 - p) * a - p * b); }, 0.0, 1.0, nodes, 1);
}

inline double upsilonK_quadrature(double a, double b, double K, int nodes = 64) {
  double A = truncate(a, K), B = truncate(b, K);
  return integrate_gl([&](double p) { return std::pow(p * B - (1 - p) * A, 2); }, 0.0, 1.0, nodes, 1);
}

using Offset = std::array<int, 3>;

struct LocalFunction {
  std::string name;
  std::vector<Offset> support;                              // site offsets A
  std::function<double(const std::vector<double>&)> eval;   // values at support, in order
  std::function<double(double)> fbar;                       // equilibrium average at density rho
  bool bounded = false;

  double at(const EnergyConfig& xi, std::size_t x) const {
    const Lattice& lat = xi.lattice();
    std::vector<double> v(support.size());
    for (std::size_t j = 0; j < support.size(); ++j) {
      std::size_t s = x;
      for (int a = 0; a < lat.d(); ++a)
        if (support[j][a] != 0) s = lat.shift(s, a, support[j][a]);
      v[j] = xi[s];
    }
    return eval(v);
  }
};

namespace local {

inline LocalFunction constant(double c) {
  return {"constant", {}, [c](const std::vector<double>&) { return c; }, [c](double) { return c; }, true};
}

inline LocalFunction site_value() {
  return {"site", {{0, 0, 0}}, [](const std::vector<double>& v) { return v[0]; }, [](double rho) { return rho; },
          false};
}

// xi(0) ^ cap: bounded and Lipschitz
inline LocalFunction capped_site(double cap) {
  return {"capped_site",
          {{0, 0, 0}},
          [cap](const std::vector<double>& v) { return std::min(v[0], cap); },
          [cap](double rho) { return m1K(rho, cap); },
          true};
}

// xi(0) (xi(e_1) ^ K)
inline LocalFunction pair_product(double K) {
  return {"pair_product",
          {{0, 0, 0}, {1, 0, 0}},
          [K](const std::vector<double>& v) { return v[0] * truncate(v[1], K); },
          [K](double rho) { return rho * m1K(rho, K); },
          false};
}

// Upsilon_K(xi(0), xi(e_1)), average Gamma_K
inline LocalFunction upsilon(double K) {
  return {"upsilon",
          {{0, 0, 0}, {1, 0, 0}},
          [K](const std::vector<double>& v) { return upsilonK(v[0], v[1], K); },
          [K](double rho) { return gammaK(rho, K); },
          false};
}

}  // namespace local

// ---- drift functional ----

// N^{2-d} sum_{x~y} (phi(y) - phi(x)) chi_K(m) (H(x) - H(y)) Psi_K(xi(x), xi(y))
inline double drift_functional(const EnergyConfig& xi, double t, const Profile& phi, const LatticeTilt& tilt) {
  const Lattice& lat = xi.lattice();
  double s = 0.0;
  for (std::size_t e = 0; e < lat.edge_count(); ++e) {
    Edge ed = lat.edge(e);
    double c = tilt.coef(e, t);
    if (c == 0.0) continue;
    double dphi = phi(lat.position(ed.y)) - phi(lat.position(ed.x));
    s += dphi * c * psiK(xi[ed.x], xi[ed.y], tilt.K());
  }
  return s * std::pow(static_cast<double>(lat.N()), 2 - lat.d());
}

// int <chi_K grad H . grad phi, Theta_K(u)> dx at time t, the limit of the drift functional.
inline double drift_limit_rate(const TiltSpec& spec, double t, const std::function<Point(const Point&)>& grad_phi) {
  const GridField& H = spec.H.at(t);
  GridField uh = spec.u.sample_u(t, H.n());
  GridField gH = gradient(H);
  double s = 0.0;
  for (std::size_t i = 0; i < uh.nodes(); ++i) {
    double u = uh(i);
    Point gp = grad_phi(uh.point(i));
    double dot = 0.0;
    for (int a = 0; a < uh.d(); ++a) dot += gH(i, a) * gp[a];
    s += aK(u, spec.K) * thetaK(u, spec.K) * dot;
  }
  return s / static_cast<double>(uh.nodes());
}

// ---- replacement statistic ----

struct ReplacementValue {
  double value = 0.0;
  bool coarse_snapshots = false;  // spacing above 100 / N^2
};

using SpaceTimeWeight = std::function<double(double, const Point&)>;

// N^{-d} sum_x phi(t, x) [tau_x F(xi_t) - Fbar(local average over eps box)] at one snapshot.
inline double replacement_integrand(const EnergyConfig& xi, double t, const LocalFunction& F,
                                    const SpaceTimeWeight& phi, double eps) {
  const Lattice& lat = xi.lattice();
  auto avg = local_average_all(xi, eps);
  double s = 0.0;
  for (std::size_t x = 0; x < lat.site_count(); ++x)
    s += phi(t, lat.position(x)) * (F.at(xi, x) - F.fbar(avg[x]));
  return s / static_cast<double>(lat.site_count());
}

// Trapezoid in time over the recorded snapshots.
inline ReplacementValue replacement_statistic(const TrajectoryRecord& rec, const LocalFunction& F,
                                              const SpaceTimeWeight& phi, double eps) {
  if (rec.snapshots.size() != rec.times.size()) throw std::invalid_argument("trajectory snapshots are incomplete");
  ReplacementValue out;
  if (rec.times.size() < 2) return out;
  const double n2 = static_cast<double>(rec.lattice.N()) * rec.lattice.N();
  std::vector<double> f(rec.times.size());
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = replacement_integrand(rec.snapshots[k], rec.times[k], F, phi, eps);
  for (std::size_t k = 0; k + 1 < f.size(); ++k) {
    double h = rec.times[k + 1] - rec.times[k];
    if (h > 100.0 / n2) out.coarse_snapshots = true;
    out.value += 0.5 * h * (f[k] + f[k + 1]);
  }
  return out;
}

// ---- martingale residual ----

struct MartingaleResidual {
  std::vector<double> times;
  std::vector<double> M;
  std::vector<double> qv;         // sum of squared jumps of M up to each time
  std::vector<double> l2_integral; // int_0^t ||xi_s||^2_{L^2_N} ds
  bool event_exact = true;
};

// <phi, pi_N(xi)> and the generator applied to it in closed form:
// N^{2-d} sum_e (phi_x - phi_y) e^beta (S e1(alpha) - xi_x e0(alpha)), times rate_scale.
namespace detail {

inline double linear_generator(const std::vector<double>& xi, const std::vector<double>& phi, double t,
                               const LatticeTilt& tilt, double rate_scale) {
  const Lattice& lat = tilt.lattice();
  double s = 0.0;
  for (std::size_t e = 0; e < lat.edge_count(); ++e) {
    Edge ed = lat.edge(e);
    auto ex = tilt.exponent(t, e, xi);
    double S = xi[ed.x] + xi[ed.y];
    s += (phi[ed.x] - phi[ed.y]) * std::exp(ex.beta) * (S * e1(ex.alpha) - xi[ed.x] * e0(ex.alpha));
  }
  return rate_scale * s * std::pow(static_cast<double>(lat.N()), 2 - lat.d());
}

inline double pairing(const std::vector<double>& xi, const std::vector<double>& phi, std::size_t sites) {
  double s = 0.0;
  for (std::size_t x = 0; x < xi.size(); ++x) s += phi[x] * xi[x];
  return s / static_cast<double>(sites);
}

}  // namespace detail

// M_t = <phi, pi_N(xi_t)> - <phi, pi_N(xi_0)> - int_0^t L <phi, pi_N> ds at the snapshot times.
// With a flux log the events are replayed exactly and the compensator is
// integrated by the midpoint rule on each inter-event interval; without one
// the generator is evaluated on snapshots and integrated by the trapezoid rule.
inline MartingaleResidual martingale_residual(const TrajectoryRecord& rec, const Profile& phi_fn,
                                              const LatticeTilt& tilt, double rate_scale = 1.0) {
  const Lattice& lat = rec.lattice;
  if (lat != tilt.lattice()) throw std::invalid_argument("trajectory and tilt live on different lattices");
  const std::size_t n = lat.site_count();
  std::vector<double> phi(n);
  for (std::size_t x = 0; x < n; ++x) phi[x] = phi_fn(lat.position(x));
  MartingaleResidual out;
  const double F0 = detail::pairing(rec.initial.values(), phi, n);
  auto l2 = [n](const std::vector<double>& v) {
    double s = 0.0;
    for (double a : v) s += a * a;
    return s / static_cast<double>(n);
  };

  if (rec.has_flux && (!rec.flux.empty() || rec.events == 0)) {
    std::vector<double> xi = rec.initial.values();
    double t = 0.0, comp = 0.0, qv = 0.0, l2i = 0.0;
    double F = F0;
    auto advance = [&](double upto) {
      double h = upto - t;
      if (h > 0.0) {
        comp += h * detail::linear_generator(xi, phi, 0.5 * (t + upto), tilt, rate_scale);
        l2i += h * l2(xi);
        t = upto;
      }
    };
    std::size_t k = 0;
    for (double ts : rec.times) {
      while (k < rec.flux.size() && rec.flux[k].t <= ts) {
        const auto& ev = rec.flux[k++];
        advance(ev.t);
        Edge ed = lat.edge(ev.edge);
        double before = phi[ed.x] * xi[ed.x] + phi[ed.y] * xi[ed.y];
        apply_jump_inplace(xi, ed, ev.p);
        double dF = (phi[ed.x] * xi[ed.x] + phi[ed.y] * xi[ed.y] - before) / static_cast<double>(n);
        F += dF;
        qv += dF * dF;
      }
      advance(ts);
      out.times.push_back(ts);
      out.M.push_back(F - F0 - comp);
      out.qv.push_back(qv);
      out.l2_integral.push_back(l2i);
    }
    return out;
  }

  out.event_exact = false;
  if (rec.snapshots.size() != rec.times.size()) throw std::invalid_argument("trajectory snapshots are incomplete");
  double comp = 0.0, qv = 0.0, l2i = 0.0, prevM = 0.0;
  double prevL = 0.0, prevl2 = 0.0, prevt = 0.0;
  for (std::size_t k = 0; k < rec.times.size(); ++k) {
    const auto& v = rec.snapshots[k].values();
    double L = detail::linear_generator(v, phi, rec.times[k], tilt, rate_scale);
    double q = l2(v);
    if (k == 0) {
      // the segment [0, t_0] uses the initial state on the left
      const auto& v0 = rec.initial.values();
      prevL = detail::linear_generator(v0, phi, 0.0, tilt, rate_scale);
      prevl2 = l2(v0);
    }
    double h = rec.times[k] - prevt;
    comp += 0.5 * h * (prevL + L);
    l2i += 0.5 * h * (prevl2 + q);
    double M = detail::pairing(v, phi, n) - F0 - comp;
    qv += (M - prevM) * (M - prevM);
    out.times.push_back(rec.times[k]);
    out.M.push_back(M);
    out.qv.push_back(qv);
    out.l2_integral.push_back(l2i);
    prevM = M;
    prevL = L;
    prevl2 = q;
    prevt = rec.times[k];
  }
  return out;
}

// ---- empirical measures against densities ----

inline MeasureState lattice_measure(const EnergyConfig& xi) {
  MeasureState m;
  m.d = xi.lattice().d();
  m.atoms = empirical_measure(xi);
  return m;
}

inline MeasureState density_measure(const GridField& u) {
  MeasureState m;
  m.d = u.d();
  m.density = u;
  return m;
}

// W~(pi_N(xi), u) with the default cutoff unless kmax is given.
inline double flat_distance(const EnergyConfig& xi, const GridField& u, int kmax = -1) {
  return flat_metric(lattice_measure(xi), density_measure(u), kmax);
}

// ---- two-sample and one-sample Kolmogorov-Smirnov ----

// P(sup |B| > lambda) for the Brownian bridge.
inline double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    s += term;
    if (std::abs(term) < 1e-16) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

struct KSResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

inline KSResult ks_one_sample(std::vector<double> x, const std::function<double(double)>& cdf) {
  if (x.empty()) throw std::invalid_argument("empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double D = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double F = cdf(x[i]);
    D = std::max({D, (i + 1) / n - F, F - i / n});
  }
  double sn = std::sqrt(n);
  return {D, kolmogorov_q((sn + 0.12 + 0.11 / sn) * D)};
}

inline KSResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double D = 0.0;
  while (i < a.size() && j < b.size()) {
    double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    D = std::max(D, std::abs(i / na - j / nb));
  }
  double ne = std::sqrt(na * nb / (na + nb));
  return {D, kolmogorov_q((ne + 0.12 + 0.11 / ne) * D)};
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty sample");
  std::size_t h = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + h, v.end());
  double m = v[h];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + h));
  return m;
}

struct MeanSE {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSE mean_se(const std::vector<double>& v) {
  MeanSE r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double s = 0.0;
    for (double x : v) s += (x - r.mean) * (x - r.mean);
    r.se = std::sqrt(s / (v.size() - 1) / v.size());
  }
  return r;
}

// ---- entropy target ----

// S_rho(u_0) + (1/2) int int R_K(u) u^2 |grad H|^2
inline QuadratureResult tilted_cost(const TiltSpec& spec, int n = 128, double rel_tol = 1e-6) {
  auto rate = [&](double t) {
    GridField u = spec.u.sample_u(t, n);
    auto sol = optimal_control(spec.u, t, n);
    GridField gH = gradient(sol.H);
    double s = 0.0;
    for (std::size_t i = 0; i < u.nodes(); ++i) {
      double g2 = 0.0;
      for (int a = 0; a < u.d(); ++a) g2 += gH(i, a) * gH(i, a);
      s += rK(u(i), spec.K) * u(i) * u(i) * g2;
    }
    return 0.5 * s / static_cast<double>(u.nodes());
  };
  return adaptive_time_integral(rate, path_segments(spec.u), 32, rel_tol, 1e-14, 6);
}

inline double entropy_target(const TiltSpec& spec, int n = 128) {
  return static_cost(spec.u.sample_u(0.0, n), spec.rho) + tilted_cost(spec, n).value;
}

}  // namespace kmplab
