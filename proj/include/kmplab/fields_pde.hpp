#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmplab/cutoff_moments.hpp"
#include "kmplab/grid_field.hpp"
#include "kmplab/persistence.hpp"

namespace kmplab {

// P_t f: multiplies mode k by exp(-t |2 pi k|^2 / 2).
inline GridField heat_step(const GridField& f, double t) {
  if (t < 0.0) throw std::invalid_argument("heat_step needs t >= 0");
  if (t == 0.0) return f;
  GridField out(f.d(), f.n(), f.components(), 0.0, f.units());
  for (int c = 0; c < f.components(); ++c) {
    GridField comp = apply_multiplier(f.component(c), [&](const std::array<int, 3>& k) {
      double s = 0.0;
      for (int a = 0; a < f.d(); ++a) s += static_cast<double>(k[a]) * k[a];
      return std::exp(-0.5 * t * kTwoPi * kTwoPi * s);
    });
    out.set_component(c, comp);
  }
  return out;
}

// ---- weighted elliptic solve for the optimal control ----

namespace detail {

// Removes the 2^d grid modes with every wavenumber in {0, n/2}; these are
// invisible to the Nyquist-free spectral derivative.
inline void project_null_modes(GridField& f) {
  const int d = f.d(), n = f.n();
  const int patterns = (n % 2 == 0) ? (1 << d) : 1;
  std::vector<double> coef(static_cast<std::size_t>(patterns), 0.0);
  auto sign = [&](std::size_t node, int pat) {
    auto c = unflatten(node, d, n);
    int parity = 0;
    for (int a = 0; a < d; ++a)
      if (pat & (1 << a)) parity += c[a];
    return (parity & 1) ? -1.0 : 1.0;
  };
  for (int pat = 0; pat < patterns; ++pat) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.nodes(); ++i) s += f(i) * sign(i, pat);
    coef[static_cast<std::size_t>(pat)] = s / static_cast<double>(f.nodes());
  }
  for (std::size_t i = 0; i < f.nodes(); ++i)
    for (int pat = 0; pat < patterns; ++pat) f(i) -= coef[static_cast<std::size_t>(pat)] * sign(i, pat);
}

// -div(w grad h)
inline GridField weighted_operator(const GridField& w, const GridField& h) {
  GridField out = divergence(scale_by(w, gradient(h)));
  out *= -1.0;
  return out;
}

}  // namespace detail

struct ControlOptions {
  double rel_tol = 1e-9;
  int max_iterations = 10000;
};

struct ControlSolution {
  GridField H;          // zero-mean potential
  GridField g;          // u grad H
  int iterations = 0;
  double residual = 0.0;   // relative
  double cost_rate = 0.0;  // (1/2) int u^2 |grad H|^2
};

// Solves div(u^2 grad H) = -dudt + (1/2) lap u by preconditioned CG.
inline ControlSolution optimal_control(const GridField& u, const GridField& dudt, const ControlOptions& opt = {}) {
  u.check_same(dudt);
  if (u.min() <= 0.0) throw NumericFailure("optimal_control needs a strictly positive density");
  const int d = u.d(), n = u.n();
  GridField w = u;
  for (double& v : w.data()) v *= v;
  const double ubar = u.mean();

  GridField lap = laplacian(u);
  GridField f = dudt - 0.5 * lap;  // A H = f with A = -div(u^2 grad .)
  detail::project_null_modes(f);
  ControlSolution sol;
  sol.H = GridField(d, n);
  const double fnorm = std::sqrt(f.dot(f));
  // right-hand sides at rounding level are treated as exact zeros
  const double scale = std::sqrt(dudt.dot(dudt)) + 0.5 * std::sqrt(lap.dot(lap));
  if (fnorm <= 1e-13 * scale || fnorm == 0.0) {
    sol.g = GridField(d, n, d);
    return sol;
  }

  auto precondition = [&](const GridField& r) {
    GridField z = apply_multiplier(r, [&](const std::array<int, 3>& k) {
      double s = 0.0;
      for (int a = 0; a < d; ++a) {
        double kk = kTwoPi * derivative_wavenumber(k[a] < 0 ? k[a] + n : k[a], n);
        s += kk * kk;
      }
      return s > 0.0 ? 1.0 / (ubar * ubar * s) : 0.0;
    });
    detail::project_null_modes(z);
    return z;
  };

  GridField x(d, n);
  GridField r = f;
  GridField z = precondition(r);
  GridField p = z;
  double rz = r.dot(z);
  double rel = 1.0;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    GridField Ap = detail::weighted_operator(w, p);
    detail::project_null_modes(Ap);
    double pAp = p.dot(Ap);
    if (!(pAp > 0.0)) break;
    double alpha = rz / pAp;
    x.axpy(alpha, p);
    r.axpy(-alpha, Ap);
    rel = std::sqrt(r.dot(r)) / fnorm;
    if (rel <= opt.rel_tol) {
      ++it;
      break;
    }
    z = precondition(r);
    double rz_new = r.dot(z);
    double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < p.nodes(); ++i) p(i) = z(i) + beta * p(i);
  }
  // true residual
  GridField res = f - detail::weighted_operator(w, x);
  detail::project_null_modes(res);
  rel = std::sqrt(res.dot(res)) / fnorm;
  if (rel > opt.rel_tol * 10.0)
    throw NumericFailure("optimal_control did not converge; refine the grid");
  detail::project_null_modes(x);
  sol.H = x;
  sol.H.set_units("potential");
  GridField gH = gradient(x);
  sol.g = scale_by(u, gH);
  sol.g.set_units("velocity");
  sol.iterations = it;
  sol.residual = rel;
  sol.cost_rate = 0.5 * x.dot(f);
  return sol;
}

inline ControlSolution optimal_control(const SmoothPath& path, double t, int n, const ControlOptions& opt = {}) {
  return optimal_control(path.sample_u(t, n), path.sample_dudt(t, n), opt);
}

// d = 1 has a closed-form optimum: u^2 H' = q + C with q' = (1/2)u'' - dudt
// and C fixed by periodicity of H. Returns the cost rate (1/2) int (q+C)^2/u^2.
struct Control1D {
  GridField dH;  // H'
  double cost_rate = 0.0;
};

inline Control1D optimal_control_1d(const GridField& u, const GridField& dudt) {
  if (u.d() != 1) throw std::invalid_argument("optimal_control_1d is one-dimensional");
  u.check_same(dudt);
  if (u.min() <= 0.0) throw NumericFailure("optimal_control_1d needs a strictly positive density");
  const int n = u.n();
  GridField src = 0.5 * laplacian(u) - dudt;
  // mean of src is zero up to rounding; antiderivative spectrally
  GridField q;
  {
    auto spec = to_spectrum(src);
    for (int i = 0; i < n; ++i) {
      int k = wavenumber(i, n);
      int kd = derivative_wavenumber(i, n);
      spec[static_cast<std::size_t>(i)] = kd == 0 ? cplx(0.0, 0.0) : spec[static_cast<std::size_t>(i)] / cplx(0.0, kTwoPi * k);
    }
    q = from_spectrum(std::move(spec), 1, n);
  }
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < u.nodes(); ++i) {
    double iu2 = 1.0 / (u(i) * u(i));
    a += q(i) * iu2;
    b += iu2;
  }
  double C = -a / b;
  Control1D out;
  out.dH = GridField(1, n);
  double cost = 0.0;
  for (std::size_t i = 0; i < u.nodes(); ++i) {
    double flux = q(i) + C;
    out.dH(i) = flux / (u(i) * u(i));
    cost += flux * flux / (u(i) * u(i));
  }
  out.cost_rate = 0.5 * cost / n;
  return out;
}

// ---- conservative splitting solvers ----

// Flux F(t, u) of the conservative drift dt u = -div F.
using FluxFunction = std::function<GridField(double, const GridField&)>;
// Pointwise speed bound |F/u| for the step-size rule.
using SpeedFunction = std::function<double(double, const GridField&)>;

struct SplittingOptions {
  std::vector<double> output_times;  // empty: {0, T}
  double dt_per_dx = 0.5;            // dt <= dt_per_dx * dx
  double cfl = 0.5;                  // dt <= cfl * dx / vmax  (dx / (2 vmax) by default)
  double blowup_cap = 1e8;
  bool drift_first = false;  // reversed Strang ordering
};

struct SplittingResult {
  TimeSeriesField series;
  std::size_t steps = 0;
  double clipped_mass = 0.0;  // total negative mass removed by clipping
  double max_mass_drift = 0.0;
};

namespace detail {

inline void clip_negatives(GridField& u, double& clipped) {
  double umax = u.max_abs();
  double lo = u.min();
  if (lo >= 0.0) return;
  if (-lo > 1e-8 * umax) throw NumericFailure("negative density beyond clipping tolerance; refine the grid");
  for (double& v : u.data())
    if (v < 0.0) {
      clipped += -v / static_cast<double>(u.nodes());
      v = 0.0;
    }
}

inline GridField drift_step(const FluxFunction& flux, double t, double dt, const GridField& u) {
  GridField k1 = divergence(flux(t, u));
  GridField mid = u;
  mid.axpy(-0.5 * dt, k1);
  GridField k2 = divergence(flux(t + 0.5 * dt, mid));
  GridField out = u;
  out.axpy(-dt, k2);
  return out;
}

}  // namespace detail

// Strang splitting for dt u = (1/2) lap u - div F(t,u): exact heat half steps
// around an RK2 midpoint drift step.
inline SplittingResult splitting_solve(const GridField& u0, const FluxFunction& flux, const SpeedFunction& speed,
                                       double T, const SplittingOptions& opt = {}) {
  if (u0.min() < 0.0) throw std::invalid_argument("initial density must be nonnegative");
  if (!(T >= 0.0)) throw std::invalid_argument("horizon must be nonnegative");
  std::vector<double> outs = opt.output_times.empty() ? std::vector<double>{0.0, T} : opt.output_times;
  std::sort(outs.begin(), outs.end());
  if (outs.front() < 0.0 || outs.back() > T) throw std::invalid_argument("output time outside [0,T]");

  const double dx = 1.0 / u0.n();
  const double m0 = u0.integral();
  SplittingResult res;
  std::vector<double> times;
  std::vector<GridField> slices;
  GridField u = u0;
  double t = 0.0;
  for (double target : outs) {
    double span = target - t;
    if (span > 0.0) {
      double vmax = speed ? speed(t, u) : 0.0;
      double dt = opt.dt_per_dx * dx;
      if (vmax > 0.0) dt = std::min(dt, opt.cfl * dx / vmax);
      auto steps = static_cast<std::size_t>(std::ceil(span / dt - 1e-12));
      dt = span / static_cast<double>(steps);
      for (std::size_t s = 0; s < steps; ++s) {
        double ts = t + static_cast<double>(s) * dt;
        if (!opt.drift_first) {
          u = heat_step(u, 0.5 * dt);
          u = detail::drift_step(flux, ts, dt, u);
          u = heat_step(u, 0.5 * dt);
        } else {
          u = detail::drift_step(flux, ts, 0.5 * dt, u);
          u = heat_step(u, dt);
          u = detail::drift_step(flux, ts + 0.5 * dt, 0.5 * dt, u);
        }
        detail::clip_negatives(u, res.clipped_mass);
        if (!(u.max_abs() <= opt.blowup_cap)) throw NumericFailure("density exceeded the blow-up cap");
      }
      res.steps += steps;
      t = target;
    }
    if (!times.empty() && target <= times.back()) continue;
    times.push_back(target);
    slices.push_back(u);
    res.max_mass_drift = std::max(res.max_mass_drift, std::abs(u.integral() - m0));
  }
  res.series = TimeSeriesField(times, slices);
  return res;
}

// Velocity field as a function of time, sampled on the solver grid.
using VectorFieldPath = std::function<GridField(double, int)>;

// dt u = (1/2) lap u - div(u g)
inline SplittingResult skeleton_solve(const GridField& u0, const VectorFieldPath& g, double T,
                                      const SplittingOptions& opt = {}) {
  const int n = u0.n();
  FluxFunction flux = [&](double t, const GridField& u) { return scale_by(u, g(t, n)); };
  SpeedFunction speed = [&](double t, const GridField&) {
    double v = 0.0;
    for (double s : {t, std::min(T, t + 0.5 / n)}) v = std::max(v, g(s, n).norm().max());
    return v;
  };
  return splitting_solve(u0, flux, speed, T, opt);
}

// dt v = (1/2) lap v - div(chi Theta_K(v) grad H)
inline SplittingResult tfp_solve(const GridField& u0, const TimeSeriesField& H, const TimeSeriesField& chi, double K,
                                 double T, const SplittingOptions& opt = {}) {
  const int n = u0.n();
  auto resample = [n](const GridField& f) {
    if (f.n() == n) return f;
    return GridField::sample(f.d(), n, [&](const Point& x) { return f.interpolate(x); });
  };
  FluxFunction flux = [&, K](double t, const GridField& v) {
    GridField gH = gradient(resample(H.at(t)));
    GridField c = resample(chi.at(t));
    GridField w(v.d(), n);
    for (std::size_t i = 0; i < v.nodes(); ++i) w(i) = c(i) * thetaK(std::max(v(i), 0.0), K);
    return scale_by(w, gH);
  };
  SpeedFunction speed = [&, K](double t, const GridField& v) {
    GridField gH = gradient(resample(H.at(t))).norm();
    GridField c = resample(chi.at(t));
    double s = 0.0;
    for (std::size_t i = 0; i < v.nodes(); ++i) {
      double vi = std::max(v(i), 1e-300);
      s = std::max(s, std::abs(c(i)) * gH(i) * thetaK(vi, K) / vi);
    }
    return s;
  };
  return splitting_solve(u0, flux, speed, T, opt);
}

// ---- Theta_K on measures ----

inline MeasureState theta_on_measure(const MeasureState& xi, double K) {
  MeasureState out;
  out.d = xi.d;
  if (!xi.density.empty()) {
    out.density = xi.density;
    for (double& v : out.density.data()) v = thetaK(std::max(v, 0.0), K);
  }
  out.atoms = xi.atoms;
  for (auto& a : out.atoms) a.w *= thetaK_infinity(K);
  return out;
}

// TV norm of the difference of two measures on the same grid with atoms
// compared by location.
inline double tv_distance(const MeasureState& a, const MeasureState& b) {
  double s = 0.0;
  if (!a.density.empty() || !b.density.empty()) {
    const GridField& ref = a.density.empty() ? b.density : a.density;
    for (std::size_t i = 0; i < ref.nodes(); ++i) {
      double va = a.density.empty() ? 0.0 : a.density(i);
      double vb = b.density.empty() ? 0.0 : b.density(i);
      s += std::abs(va - vb);
    }
    s /= static_cast<double>(ref.nodes());
  }
  std::vector<Atom> all = a.atoms;
  for (auto at : b.atoms) {
    at.w = -at.w;
    all.push_back(at);
  }
  std::vector<bool> used(all.size(), false);
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (used[i]) continue;
    double w = all[i].w;
    for (std::size_t j = i + 1; j < all.size(); ++j)
      if (!used[j] && all[j].x == all[i].x) {
        w += all[j].w;
        used[j] = true;
      }
    s += std::abs(w);
  }
  return s;
}

// ---- field output ----

// CSV: x0[,x1,x2],value per node (first component) with CRLF line ends.
inline void write_field_csv(std::ostream& os, const GridField& f, double t = 0.0) {
  os << "t";
  for (int a = 0; a < f.d(); ++a) os << ",x" << a;
  for (int c = 0; c < f.components(); ++c) os << ",v" << c;
  os << "\r\n";
  for (std::size_t i = 0; i < f.nodes(); ++i) {
    Point p = f.point(i);
    os << io::fmt(t);
    for (int a = 0; a < f.d(); ++a) os << ',' << io::fmt(p[a]);
    for (int c = 0; c < f.components(); ++c) os << ',' << io::fmt(f(i, c));
    os << "\r\n";
  }
}

inline void write_field_series(std::ostream& os, const TimeSeriesField& s, std::uint64_t seed = 0) {
  const GridField& f0 = s.slices().front();
  ContainerHeader h;
  h.kind = ContainerKind::GridFieldSeries;
  h.d = static_cast<std::uint32_t>(f0.d());
  h.N = static_cast<std::uint32_t>(f0.n());
  h.components = static_cast<std::uint32_t>(f0.components());
  h.T = s.times().back();
  h.seed = seed;
  h.snapshots = s.size();
  write_header(os, h);
  for (std::size_t k = 0; k < s.size(); ++k) {
    io::put_le<double>(os, s.times()[k]);
    for (double v : s.slices()[k].data()) io::put_le<double>(os, v);
  }
}

inline TimeSeriesField read_field_series(std::istream& is) {
  ContainerHeader h = read_header(is);
  if (h.kind != ContainerKind::GridFieldSeries) throw std::runtime_error("container does not hold a field series");
  std::vector<double> ts;
  std::vector<GridField> fs;
  for (std::uint64_t k = 0; k < h.snapshots; ++k) {
    ts.push_back(io::get_le<double>(is));
    GridField f(static_cast<int>(h.d), static_cast<int>(h.N), static_cast<int>(h.components));
    for (double& v : f.data()) v = io::get_le<double>(is);
    fs.push_back(std::move(f));
  }
  return TimeSeriesField(ts, fs);
}

}  // namespace kmplab
