#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmplab/fields_pde.hpp"
#include "kmplab/grid_field.hpp"
#include "kmplab/mollifier.hpp"
#include "kmplab/quadrature.hpp"

namespace kmplab {

inline constexpr double kInfiniteCost = std::numeric_limits<double>::infinity();

// S_rho(xi) = <1/rho, xi> - int log(u/rho) dx - 1, u the density part.
inline double static_cost(const MeasureState& xi, double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("reference density must be positive");
  if (xi.density.empty()) return kInfiniteCost;
  double logint = 0.0;
  for (double v : xi.density.data()) {
    if (!(v > 0.0)) return kInfiniteCost;
    logint += std::log(v / rho);
  }
  logint /= static_cast<double>(xi.density.nodes());
  return xi.total_mass() / rho - logint - 1.0;
}

inline double static_cost(const GridField& u, double rho) {
  MeasureState m;
  m.d = u.d();
  m.density = u;
  return static_cost(m, rho);
}

struct CostOptions {
  int n = 64;           // spatial grid per side
  int nodes = 64;       // Gauss nodes per time panel
  double rel_tol = 1e-4;
  int max_doublings = 8;
  bool exact_1d = true;  // closed-form control in d = 1
  ControlOptions control;
};

inline std::vector<TimeSegment> path_segments(const SmoothPath& path) {
  return make_segments(0.0, path.T, path.breakpoints, path.singular_times);
}

// Cost rate (1/2) int u^2 |grad H|^2 at time t.
inline double control_cost_rate(const SmoothPath& path, double t, const CostOptions& opt = {}) {
  GridField u = path.sample_u(t, opt.n);
  GridField du = path.sample_dudt(t, opt.n);
  if (path.d == 1 && opt.exact_1d) return optimal_control_1d(u, du).cost_rate;
  return optimal_control(u, du, opt.control).cost_rate;
}

// J(u) = (1/2) int int u^2 |grad H|^2 with H the optimal potential.
inline QuadratureResult dynamic_cost(const SmoothPath& path, const CostOptions& opt = {}) {
  auto f = [&](double t) { return control_cost_rate(path, t, opt); };
  return adaptive_time_integral(f, path_segments(path), opt.nodes, opt.rel_tol, 1e-14, opt.max_doublings);
}

// (1/2) int int |g|^2 for a supplied control g(t, n).
inline QuadratureResult competitor_cost(const SmoothPath& path, const VectorFieldPath& g, const CostOptions& opt = {}) {
  auto f = [&](double t) {
    GridField gt = g(t, opt.n);
    return 0.5 * gt.dot(gt);
  };
  return adaptive_time_integral(f, path_segments(path), opt.nodes, opt.rel_tol, 1e-14, opt.max_doublings);
}

// (1/2) int |grad log u|^2 dx at time t; +inf if u touches zero on the grid.
inline double dissipation_rate(const SmoothPath& path, double t, int n) {
  GridField u = path.sample_u(t, n);
  if (!(u.min() > 0.0)) return kInfiniteCost;
  GridField gu = path.sample_grad(t, n);
  double s = 0.0;
  for (std::size_t i = 0; i < u.nodes(); ++i) {
    double g2 = 0.0;
    for (int a = 0; a < u.d(); ++a) g2 += gu(i, a) * gu(i, a);
    s += g2 / (u(i) * u(i));
  }
  return 0.5 * s / static_cast<double>(u.nodes());
}

inline QuadratureResult entropy_dissipation(const SmoothPath& path, const CostOptions& opt = {}) {
  auto f = [&](double t) { return dissipation_rate(path, t, opt.n); };
  return adaptive_time_integral(f, path_segments(path), opt.nodes, opt.rel_tol, 1e-14, opt.max_doublings);
}

// Along dt u = (1/2) lap u - div(u g) the log entropy obeys
//   d/dt S_rho(u) = -(1/2)||grad log u||^2 + <grad log u, g>.
// Returns the right-hand side for one time slice.
inline double entropy_rate(const GridField& u, const GridField& g) {
  if (g.components() != u.d()) throw std::invalid_argument("control must be a vector field");
  if (!(u.min() > 0.0)) throw NumericFailure("entropy rate needs a positive density");
  GridField gu = gradient(u);
  double diss = 0.0, cross = 0.0;
  for (std::size_t i = 0; i < u.nodes(); ++i)
    for (int a = 0; a < u.d(); ++a) {
      double l = gu(i, a) / u(i);
      diss += l * l;
      cross += l * g(i, a);
    }
  double nn = static_cast<double>(u.nodes());
  return -0.5 * diss / nn + cross / nn;
}

// Both sides of the energy inequality along a stored solution with its control.
struct EntropyBalance {
  double S0 = 0.0;
  double ST = 0.0;
  double dissipation = 0.0;  // (1/2) ||grad log u||^2_{L^2_{t,x}}
  double control = 0.0;      // (1/2) ||g||^2_{L^2_{t,x}}
  double identity_gap = 0.0; // |S_T - S_0 - int rate|
  double lhs() const { return ST + dissipation; }
  double rhs() const { return S0 + control; }
};

// Trapezoid-in-time evaluation on the stored slices of a solution of the
// skeleton equation driven by g.
inline EntropyBalance entropy_balance(const TimeSeriesField& sol, const VectorFieldPath& g, double rho = 1.0) {
  const auto& ts = sol.times();
  const auto& us = sol.slices();
  if (ts.size() < 2) throw std::invalid_argument("entropy balance needs at least two slices");
  EntropyBalance b;
  b.S0 = static_cost(us.front(), rho);
  b.ST = static_cost(us.back(), rho);
  std::vector<double> diss(ts.size()), ctrl(ts.size()), rate(ts.size());
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const GridField& u = us[k];
    GridField gk = g(ts[k], u.n());
    GridField gu = gradient(u);
    double dsum = 0.0;
    for (std::size_t i = 0; i < u.nodes(); ++i)
      for (int a = 0; a < u.d(); ++a) dsum += std::pow(gu(i, a) / u(i), 2);
    diss[k] = 0.5 * dsum / static_cast<double>(u.nodes());
    ctrl[k] = 0.5 * gk.dot(gk);
    rate[k] = entropy_rate(u, gk);
  }
  double irate = 0.0;
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    double h = ts[k + 1] - ts[k];
    b.dissipation += 0.5 * h * (diss[k] + diss[k + 1]);
    b.control += 0.5 * h * (ctrl[k] + ctrl[k + 1]);
    irate += 0.5 * h * (rate[k] + rate[k + 1]);
  }
  b.identity_gap = std::abs(b.ST - b.S0 - irate);
  return b;
}

// int eps rho_sigma / (1 + eps rho_sigma) |grad log rho_sigma|^2 dx and the
// power-law bound C_theta eps^{1-theta} sigma^{d theta - 2}.
struct DissipationValue {
  double value = 0.0;
  double bound = 0.0;
  double c_theta = 0.0;
};

inline DissipationValue dissipation_integral(double eps, double sigma, double theta, int d, int panels = 256) {
  if (!(sigma > 0.0 && sigma < 0.5)) throw std::invalid_argument("sigma must lie in (0, 1/2)");
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("theta must lie in (0, 1)");
  const Mollifier& mol = mollifier(d);
  const double sd = std::pow(sigma, d);
  // substituting x = sigma y:
  //   sigma^{d-2} int eps rho / (sigma^d + eps rho) (rho'/rho)^2 dy
  auto integrand = [&](double y) {
    double lp = mol.log_profile(y);
    if (!std::isfinite(lp)) return 0.0;
    // eps rho / (sd + eps rho) = 1 / (1 + sd / (eps rho))
    double ratio = 1.0 / (1.0 + std::exp(std::log(sd / eps) - lp));
    double g = mol.dlog(y);
    return ratio * g * g;
  };
  // split where eps rho = sigma^d: the weight switches from ~1 to ~eps rho / sigma^d
  std::vector<double> cuts{0.0};
  double target = std::log(sd / eps);
  if (mol.log_profile(0.0) > target) {
    double lo = 0.0, hi = 0.5;
    for (int it = 0; it < 200; ++it) {
      double mid = 0.5 * (lo + hi);
      (mol.log_profile(mid) > target ? lo : hi) = mid;
    }
    if (lo > 0.0 && lo < 0.5) cuts.push_back(lo);
  }
  cuts.push_back(0.5);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    total += integrate_gl([&](double y) { return integrand(y) * std::pow(y, d - 1); }, cuts[i], cuts[i + 1], 32,
                          panels);
  DissipationValue out;
  out.value = std::pow(sigma, d - 2) * sphere_area(d) * total;
  out.c_theta = mol.c_theta(theta);
  out.bound = out.c_theta * std::pow(eps, 1.0 - theta) * std::pow(sigma, d * theta - 2.0);
  return out;
}

// Default exponents: 1/2 in d = 1, 1 - gamma in d = 2, 3/4 in d = 3.
inline double default_theta(int d, double gamma = 1.0 / 3.0) {
  switch (d) {
    case 1: return 0.5;
    case 2: return 1.0 - gamma;
    case 3: return 0.75;
    default: throw std::invalid_argument("dimension must be 1, 2 or 3");
  }
}

// Least-squares slope of log value against log sigma at fixed eps.
inline double sigma_exponent(double eps, const std::vector<double>& sigmas, double theta, int d) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (double s : sigmas) {
    double x = std::log(s), y = std::log(dissipation_integral(eps, s, theta, d).value);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double m = static_cast<double>(sigmas.size());
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

struct CostReport {
  double S0 = 0.0;
  double ST = 0.0;
  double J_optimal = 0.0;
  double J_optimal_error = 0.0;
  double J_competitor = std::numeric_limits<double>::quiet_NaN();
  double J_competitor_error = 0.0;
  double dissipation = 0.0;
  double dissipation_error = 0.0;
  std::vector<std::pair<std::string, double>> bounds;

  bool consistent() const {
    bool ok = S0 >= 0.0 && ST >= 0.0 && J_optimal >= 0.0 && dissipation >= 0.0;
    if (std::isfinite(J_competitor)) ok = ok && J_optimal <= J_competitor + J_optimal_error + J_competitor_error + 1e-12;
    return ok;
  }
};

inline CostReport cost_report(const SmoothPath& path, double rho, const VectorFieldPath& competitor = {},
                              const CostOptions& opt = {}) {
  CostReport r;
  r.S0 = static_cost(path.sample_u(0.0, opt.n), rho);
  r.ST = static_cost(path.sample_u(path.T, opt.n), rho);
  auto J = dynamic_cost(path, opt);
  r.J_optimal = J.value;
  r.J_optimal_error = J.error_estimate;
  if (competitor) {
    auto Jc = competitor_cost(path, competitor, opt);
    r.J_competitor = Jc.value;
    r.J_competitor_error = Jc.error_estimate;
  }
  auto D = entropy_dissipation(path, opt);
  r.dissipation = D.value;
  r.dissipation_error = D.error_estimate;
  return r;
}

}  // namespace kmplab
