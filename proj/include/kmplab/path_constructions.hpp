#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "kmplab/common.hpp"
#include "kmplab/cost_functionals.hpp"
#include "kmplab/grid_field.hpp"
#include "kmplab/metrics.hpp"
#include "kmplab/mollifier.hpp"
#include "kmplab/quadrature.hpp"
#include "kmplab/rng.hpp"

namespace kmplab {

// ---- relaxed measures ----

// Atomic content of xi_{t-} and xi_t at a time where atoms are present.
struct AtomSlice {
  double t = 0.0;
  std::vector<Atom> before;
  std::vector<Atom> at;
};

using SpectrumAt = std::function<Spectrum(double, const ModeSet&)>;

struct RelaxedMeasure {
  int d = 1;
  double T = 1.0;
  double energy = 0.0;  // e(Xi), the constant spatial mass
  SpectrumAt spectrum;  // Fourier coefficients of xi_t
  std::function<double(double, const Point&)> density;  // absolutely continuous part, optional
  std::vector<AtomSlice> slices;
  std::vector<double> breakpoints;
};

struct JumpEntry {
  double t = 0.0;
  double tv = 0.0;
};

// Exact ||xi_t - xi_{t-}||_TV for the stored atomic slices; atoms at the
// same location are merged before taking absolute values.
inline std::vector<JumpEntry> tv_jump_table(const RelaxedMeasure& xi) {
  std::vector<JumpEntry> out;
  for (const auto& s : xi.slices) {
    std::vector<std::pair<Point, double>> diff;
    auto add = [&](const Point& x, double w) {
      for (auto& e : diff)
        if (e.first == x) {
          e.second += w;
          return;
        }
      diff.emplace_back(x, w);
    };
    for (const auto& a : s.at) add(a.x, a.w);
    for (const auto& a : s.before) add(a.x, -a.w);
    double tv = 0.0;
    for (const auto& e : diff) tv += std::abs(e.second);
    out.push_back({s.t, tv});
  }
  return out;
}

// ---- moving radial bumps ----

// eps rho_{r(t)}(x - s(t))
struct MovingBump {
  double eps = 0.0;
  std::function<double(double)> r;
  std::function<double(double)> dr;
  std::function<Point(double)> s;
  std::function<Point(double)> ds;
};

inline double speed(const Point& v, int d) {
  double s = 0.0;
  for (int a = 0; a < d; ++a) s += v[a] * v[a];
  return std::sqrt(s);
}

// Background c plus a sum of moving bumps, with semi-analytic cost rates.
// The rates treat bumps as isolated in free space: the radial part is exact
// on the torus, the translation part neglects periodic images and
// interactions between bumps.
class BumpField {
 public:
  BumpField() = default;
  BumpField(int d, double T, double c, std::vector<MovingBump> bumps)
      : d_(d), T_(T), c_(c), bumps_(std::move(bumps)), dipole_cache_(std::make_shared<DipoleCache>()) {
    if (d < 1 || d > 3) throw std::invalid_argument("dimension must be 1, 2 or 3");
    if (!(c > 0.0)) throw std::invalid_argument("background level must be positive");
  }

  int d() const { return d_; }
  double T() const { return T_; }
  double background() const { return c_; }
  const std::vector<MovingBump>& bumps() const { return bumps_; }
  std::vector<double> breakpoints;
  std::vector<double> singular_times;
  int dipole_resolution = 20000;

  double mass() const {
    double m = c_;
    for (const auto& b : bumps_) m += b.eps;
    return m;
  }

  double u(double t, const Point& x) const {
    const Mollifier& mol = mollifier(d_);
    double v = c_;
    for (const auto& b : bumps_) {
      double r = b.r(t);
      Point s = b.s(t);
      double z = std::sqrt(torus_dist2(x, s, d_));
      if (z < 0.5 * r) v += b.eps * mol.scaled(z, r);
    }
    return v;
  }

  double dudt(double t, const Point& x) const {
    const Mollifier& mol = mollifier(d_);
    double v = 0.0;
    for (const auto& b : bumps_) {
      double r = b.r(t);
      Point s = b.s(t);
      Point z{0, 0, 0};
      for (int a = 0; a < d_; ++a) z[a] = torus_delta(s[a], x[a]);
      double zn = speed(z, d_);
      if (zn >= 0.5 * r) continue;
      double part = mol.scaled_dsigma(zn, r) * b.dr(t);
      if (zn > 0.0) {
        Point vs = b.ds(t);
        double proj = 0.0;
        for (int a = 0; a < d_; ++a) proj += z[a] * vs[a];
        part -= mol.scaled_dr(zn, r) * proj / zn;
      }
      v += b.eps * part;
    }
    return v;
  }

  Point grad(double t, const Point& x) const {
    const Mollifier& mol = mollifier(d_);
    Point g{0, 0, 0};
    for (const auto& b : bumps_) {
      double r = b.r(t);
      Point s = b.s(t);
      Point z{0, 0, 0};
      for (int a = 0; a < d_; ++a) z[a] = torus_delta(s[a], x[a]);
      double zn = speed(z, d_);
      if (zn >= 0.5 * r || zn == 0.0) continue;
      double dr = b.eps * mol.scaled_dr(zn, r) / zn;
      for (int a = 0; a < d_; ++a) g[a] += dr * z[a];
    }
    return g;
  }

  SmoothPath smooth_path() const {
    SmoothPath p;
    p.d = d_;
    p.T = T_;
    p.m = c_;
    double top = c_;
    for (const auto& b : bumps_) top += b.eps * mollifier(d_).scaled(0.0, b.r(0.0));
    p.M = top;
    BumpField self = *this;
    p.u = [self](double t, const Point& x) { return self.u(t, x); };
    p.dudt = [self](double t, const Point& x) { return self.dudt(t, x); };
    p.grad = [self](double t, const Point& x) { return self.grad(t, x); };
    p.breakpoints = breakpoints;
    p.singular_times = singular_times;
    return p;
  }

  Spectrum spectrum(double t, const ModeSet& m) const {
    const FourierTable& ft = fourier_table(d_);
    Spectrum s(m.size(), cplx(0.0, 0.0));
    s[0] = c_;
    for (const auto& b : bumps_) {
      double r = b.r(t);
      Point c = b.s(t);
      for (std::size_t j = 0; j < m.size(); ++j)
        s[j] += b.eps * ft(r * mode_norm(m.k[j], d_)) * plane_wave(m.k[j], c, d_);
    }
    return s;
  }

  RelaxedMeasure relaxed() const {
    RelaxedMeasure xi;
    xi.d = d_;
    xi.T = T_;
    xi.energy = mass();
    BumpField self = *this;
    xi.spectrum = [self](double t, const ModeSet& m) { return self.spectrum(t, m); };
    xi.density = [self](double t, const Point& x) { return self.u(t, x); };
    xi.breakpoints = breakpoints;
    return xi;
  }

  // Optimal cost rate: radial part exact, translation part by the dipole solve.
  double optimal_rate(double t) const {
    double s = 0.0;
    for (const auto& b : bumps_) {
      double r = b.r(t);
      s += radial_bump_rate(d_, c_, b.eps, r, b.dr(t), 512);
      double v = speed(b.ds(t), d_);
      if (v > 0.0) {
        if (d_ == 1) throw std::invalid_argument("translating bumps in d = 1 need the grid solver");
        double A = b.eps / std::pow(r, d_);
        s += 0.5 * std::pow(r, d_) * A * A * v * v * sphere_area(d_) / d_ * dipole(A);
      }
    }
    return s;
  }

  // (1/2) ||g||^2 for g = sum v h / (c + sum v) with h = (1/2) grad log v + b,
  // b = (r'/r)(x - s) + s' on each support.
  double competitor_rate(double t) const {
    const Mollifier& mol = mollifier(d_);
    double s = 0.0;
    for (const auto& b : bumps_) {
      double r = b.r(t);
      s += radial_bump_rate(d_, c_, b.eps, r, b.dr(t), 512);
      double v = speed(b.ds(t), d_);
      if (v > 0.0) {
        double A = b.eps / std::pow(r, d_);
        double frac2 = std::pow(r, d_) * radial_integral(d_, [&](double y) {
          double p = A * mol.profile(y);
          double q = p / (c_ + p);
          return q * q;
        }, 0.5, 512);
        s += 0.5 * v * v * frac2;
      }
    }
    return s;
  }

  // int v/(c+v) |h|^2 per bump, summed.
  double weighted_h_rate(double t) const {
    const Mollifier& mol = mollifier(d_);
    double s = 0.0;
    for (const auto& b : bumps_) {
      double r = b.r(t), dr = b.dr(t);
      double A = b.eps / std::pow(r, d_);
      double v = speed(b.ds(t), d_);
      s += std::pow(r, d_) * radial_integral(d_, [&](double y) {
        double lp = mol.log_profile(y);
        if (!std::isfinite(lp)) return 0.0;
        double p = A * std::exp(lp);
        double w = p / (c_ + p);
        double hr = mol.dlog(y) / (2.0 * r) + dr * y;
        return w * (hr * hr + v * v);
      }, 0.5, 512);
    }
    return s;
  }

  std::vector<TimeSegment> segments() const { return make_segments(0.0, T_, breakpoints, singular_times); }

  QuadratureResult optimal_cost(double rel_tol = 1e-6) const {
    return adaptive_time_integral([&](double t) { return optimal_rate(t); }, segments(), 32, rel_tol, 1e-16, 10);
  }
  QuadratureResult competitor_cost(double rel_tol = 1e-6) const {
    return adaptive_time_integral([&](double t) { return competitor_rate(t); }, segments(), 32, rel_tol, 1e-16, 10);
  }
  QuadratureResult weighted_h_cost(double rel_tol = 1e-6) const {
    return adaptive_time_integral([&](double t) { return weighted_h_rate(t); }, segments(), 32, rel_tol, 1e-16, 10);
  }

 private:
  struct DipoleCache {
    std::mutex m;
    std::map<double, double> q;
  };

  double dipole(double A) const {
    std::lock_guard<std::mutex> lock(dipole_cache_->m);
    auto it = dipole_cache_->q.find(A);
    if (it != dipole_cache_->q.end()) return it->second;
    double Q = dipole_coefficient(d_, c_, A, dipole_resolution);
    dipole_cache_->q.emplace(A, Q);
    return Q;
  }

  int d_ = 1;
  double T_ = 1.0;
  double c_ = 1.0;
  std::vector<MovingBump> bumps_;
  std::shared_ptr<DipoleCache> dipole_cache_;
};

// ---- weak form of the skeleton equation ----

// A smooth test function with its derivatives.
struct TestFunction {
  std::function<double(double, const Point&)> phi;
  std::function<double(double, const Point&)> dt;
  std::function<Point(double, const Point&)> grad;
  std::function<double(double, const Point&)> lap;
};

// phi = (1 + t) cos(2 pi (k.x) + shift)
inline TestFunction trig_test_function(const Mode& k, int d, double shift = 0.0) {
  double k2 = 0.0;
  for (int a = 0; a < d; ++a) k2 += static_cast<double>(k[a]) * k[a];
  auto arg = [k, d, shift](const Point& x) {
    double s = shift;
    for (int a = 0; a < d; ++a) s += kTwoPi * k[a] * x[a];
    return s;
  };
  TestFunction f;
  f.phi = [arg](double t, const Point& x) { return (1 + t) * std::cos(arg(x)); };
  f.dt = [arg](double, const Point& x) { return std::cos(arg(x)); };
  f.grad = [arg, k, d](double t, const Point& x) {
    Point g{0, 0, 0};
    double s = -(1 + t) * std::sin(arg(x));
    for (int a = 0; a < d; ++a) g[a] = s * kTwoPi * k[a];
    return g;
  };
  f.lap = [arg, k2](double t, const Point& x) { return -(1 + t) * kTwoPi * kTwoPi * k2 * std::cos(arg(x)); };
  return f;
}

namespace detail {

// int_{|z| < r/2} F(z) dz in polar coordinates around a bump.
template <class F>
double bump_integral(int d, double r, F&& f, int radial_panels = 64, int angles = 64) {
  const double R = 0.5 * r;
  const GaussRule& g = gauss_legendre(16);
  double total = 0.0;
  auto radial = [&](auto&& angular) {
    double h = R / radial_panels;
    for (int p = 0; p < radial_panels; ++p) {
      double mid = (p + 0.5) * h;
      for (std::size_t i = 0; i < g.x.size(); ++i) {
        double rho = mid + 0.5 * h * g.x[i];
        total += 0.5 * h * g.w[i] * std::pow(rho, d - 1) * angular(rho);
      }
    }
  };
  if (d == 1) {
    radial([&](double rho) { return f(Point{rho, 0, 0}) + f(Point{-rho, 0, 0}); });
  } else if (d == 2) {
    radial([&](double rho) {
      double s = 0.0;
      for (int a = 0; a < angles; ++a) {
        double th = kTwoPi * a / angles;
        s += f(Point{rho * std::cos(th), rho * std::sin(th), 0});
      }
      return s * kTwoPi / angles;
    });
  } else {
    const GaussRule& gc = gauss_legendre(angles / 2);
    radial([&](double rho) {
      double s = 0.0;
      for (std::size_t i = 0; i < gc.x.size(); ++i) {
        double ct = gc.x[i], st = std::sqrt(1 - ct * ct);
        for (int a = 0; a < angles; ++a) {
          double ph = kTwoPi * a / angles;
          s += gc.w[i] * f(Point{rho * st * std::cos(ph), rho * st * std::sin(ph), rho * ct});
        }
      }
      return s * kTwoPi / angles;
    });
  }
  return total;
}

}  // namespace detail

// <u_T, phi_T> - <u_0, phi_0> - int [<u, dt phi + lap phi / 2> + <u g, grad phi>] dt
// for the competitor flux u g = sum_k ((1/2) grad v_k + v_k b_k). The constant
// background contributes exactly zero and is left out.
inline double weak_residual(const BumpField& field, const TestFunction& f, double rel_tol = 1e-10) {
  const int d = field.d();
  const Mollifier& mol = mollifier(d);
  auto bump_pairing = [&](const MovingBump& b, double t, bool flux) {
    double r = b.r(t), dr = b.dr(t);
    Point s = b.s(t), vs = b.ds(t);
    return detail::bump_integral(d, r, [&](const Point& z) {
      Point x{0, 0, 0};
      for (int a = 0; a < d; ++a) x[a] = wrap01(s[a] + z[a]);
      double zn = speed(z, d);
      double v = b.eps * mol.scaled(zn, r);
      if (!flux) return v * f.phi(t, x);
      double out = v * (f.dt(t, x) + 0.5 * f.lap(t, x));
      Point gp = f.grad(t, x);
      double dv = b.eps * mol.scaled_dr(zn, r);
      for (int a = 0; a < d; ++a) {
        double unit = zn > 0.0 ? z[a] / zn : 0.0;
        double bb = dr / r * z[a] + vs[a];
        out += (0.5 * dv * unit + v * bb) * gp[a];
      }
      return out;
    });
  };
  double boundary = 0.0;
  for (const auto& b : field.bumps()) boundary += bump_pairing(b, field.T(), false) - bump_pairing(b, 0.0, false);
  auto rate = [&](double t) {
    double s = 0.0;
    for (const auto& b : field.bumps()) s += bump_pairing(b, t, true);
    return s;
  };
  auto integral = adaptive_time_integral(rate, field.segments(), 16, rel_tol, 1e-15, 10);
  return boundary - integral.value;
}

// ---- shared pieces ----

// Shortest displacement from a to b on the torus.
inline Point torus_displacement(const Point& a, const Point& b, int d) {
  Point v{0, 0, 0};
  for (int i = 0; i < d; ++i) v[i] = torus_delta(a[i], b[i]);
  return v;
}

// phi(s, a, b) along the shortest geodesic with smoothstep timing.
inline Point geodesic_point(const Point& a, const Point& b, int d, double s) {
  Point v = torus_displacement(a, b, d);
  double w = Smoothstep::value(s);
  Point p{0, 0, 0};
  for (int i = 0; i < d; ++i) p[i] = wrap01(a[i] + w * v[i]);
  return p;
}

inline Point geodesic_velocity(const Point& a, const Point& b, int d, double s) {
  Point v = torus_displacement(a, b, d);
  double w = Smoothstep::derivative(s);
  Point p{0, 0, 0};
  for (int i = 0; i < d; ++i) p[i] = w * v[i];
  return p;
}

// ---- d = 1: a bump collapsing to an atom ----

struct Singular1D {
  BumpField path;
  RelaxedMeasure limit;
  int n = 1;
  double t0 = 0.0;
  double x0 = 0.0;
  double sigma0 = 0.0;
  VectorFieldPath competitor;  // g^n on a grid
};

// r_{n,t} = sigma0 n^{-1} psi(n |t - t0|^{1/2})
inline Singular1D build_singular_1d(int n, double t0, double x0, double sigma0, double T = 1.0) {
  if (n < 1) throw std::invalid_argument("n must be positive");
  if (!(T > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (!(sigma0 > 0.0 && sigma0 < 0.5 / std::sqrt(T))) throw std::invalid_argument("sigma0 must lie in (0, 1/(2 sqrt T))");
  if (t0 < 0.0 || t0 > T) throw std::invalid_argument("t0 must lie in [0, T]");
  const double nn = n;
  MovingBump b;
  b.eps = 1.0;
  b.r = [=](double t) { return sigma0 / nn * TemporalCutoff::value(nn * std::sqrt(std::abs(t - t0))); };
  b.dr = [=](double t) {
    double a = std::abs(t - t0);
    if (a == 0.0) return 0.0;
    double sg = t > t0 ? 1.0 : -1.0;
    return sigma0 * TemporalCutoff::derivative(nn * std::sqrt(a)) * sg / (2.0 * std::sqrt(a));
  };
  Point c{wrap01(x0), 0, 0};
  b.s = [c](double) { return c; };
  b.ds = [](double) { return Point{0, 0, 0}; };
  Singular1D out;
  out.n = n;
  out.t0 = t0;
  out.x0 = c[0];
  out.sigma0 = sigma0;
  out.path = BumpField(1, T, 1.0, {b});
  for (double dt : {1.5 / nn, 2.0 / nn})
    for (double sg : {-1.0, 1.0}) {
      double t = t0 + sg * dt * dt;
      if (t > 0.0 && t < T) out.path.breakpoints.push_back(t);
    }
  if (t0 > 0.0 && t0 < T) out.path.breakpoints.push_back(t0);

  // limit: 1 + rho_{sigma0 |t - t0|^{1/2}}(x - x0), with the atom delta_{x0} at t0
  MovingBump lb = b;
  lb.r = [=](double t) { return sigma0 * std::sqrt(std::abs(t - t0)); };
  lb.dr = [=](double t) {
    double a = std::abs(t - t0);
    return a == 0.0 ? 0.0 : sigma0 * (t > t0 ? 1.0 : -1.0) / (2.0 * std::sqrt(a));
  };
  BumpField lim(1, T, 1.0, {lb});
  lim.breakpoints = {t0};
  out.limit = lim.relaxed();
  out.limit.density = [lim, t0](double t, const Point& x) { return t == t0 ? 1.0 : lim.u(t, x); };
  out.limit.slices.push_back({t0, {{c, 1.0}}, {{c, 1.0}}});

  BumpField pf = out.path;
  out.competitor = [pf](double t, int ngrid) {
    GridField g(1, ngrid, 1);
    const auto& bb = pf.bumps().front();
    const Mollifier& mol = mollifier(1);
    double r = bb.r(t), dr = bb.dr(t), s = bb.s(t)[0];
    for (std::size_t i = 0; i < g.nodes(); ++i) {
      double z = torus_delta(s, g.point(i)[0]);
      double az = std::abs(z);
      if (az >= 0.5 * r) continue;
      double p = mol.scaled(az, r);
      double dp = mol.scaled_dr(az, r) * (z < 0 ? -1.0 : 1.0);
      g(i) = 0.5 * dp / (1.0 + p) + p / (1.0 + p) * dr / r * z;
    }
    return g;
  };
  return out;
}

// Singular part of xi_{t0} for the d = 1 limit (mass of the atom).
inline double singular_mass_at(const RelaxedMeasure& xi, double t) {
  double m = 0.0;
  for (const auto& s : xi.slices)
    if (s.t == t)
      for (const auto& a : s.at) m += a.w;
  return m;
}

// ---- d = 2: prescribed jumps ----

struct JumpSpec2D {
  std::vector<double> eps;
  std::vector<double> t;
  std::vector<Point> a;
  std::vector<Point> b;
  double gamma = 1.0 / 3.0;
  int n = 1;  // number of jumps used
  int m = 16;
  double sigma0 = 0.15;
  double T = 1.0;

  double theta() const { return 1.0 - gamma; }
  double tau() const { return 1.0 / m; }
  double lambda(int k) const { return std::pow(eps[k], 0.5 * (theta() - 1.0)) / std::pow(m, 2.0 - theta()); }

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
    if (n < 1 || n > static_cast<int>(eps.size())) throw std::invalid_argument("n exceeds the jump list");
    if (t.size() != eps.size() || a.size() != eps.size() || b.size() != eps.size())
      throw std::invalid_argument("jump lists have different lengths");
    if (m < 1) throw std::invalid_argument("m must be positive");
    if (!(sigma0 > 0.0 && sigma0 < 0.5 / std::sqrt(T))) throw std::invalid_argument("sigma0 must lie in (0, 1/(2 sqrt T))");
    for (std::size_t k = 0; k < eps.size(); ++k) {
      if (!(eps[k] > 0.0)) throw std::invalid_argument("jump sizes must be positive");
      if (!(t[k] > 0.0 && t[k] < T)) throw std::invalid_argument("jump times must lie in (0, T)");
      if (a[k] == b[k]) throw std::invalid_argument("jump endpoints must differ");
      for (std::size_t j = 0; j < k; ++j)
        if (t[j] == t[k]) throw std::invalid_argument("jump times must be distinct");
    }
  }
};

// r_t and its derivative for one jumping bump.
struct JumpRadius {
  double sigma0, tau, lambda, t0;
  double operator()(double t) const {
    double q;
    if (t < t0 - lambda) q = std::sqrt(t0 - lambda - t) / tau;
    else if (t < t0) return sigma0 * tau;
    else q = std::sqrt(t - t0) / tau;
    return sigma0 * tau * TemporalCutoff::value(q);
  }
  double derivative(double t) const {
    if (t < t0 - lambda) {
      double a = t0 - lambda - t;
      return -sigma0 * TemporalCutoff::derivative(std::sqrt(a) / tau) / (2.0 * std::sqrt(a));
    }
    if (t < t0) return 0.0;
    double a = t - t0;
    if (a == 0.0) return 0.0;
    return sigma0 * TemporalCutoff::derivative(std::sqrt(a) / tau) / (2.0 * std::sqrt(a));
  }
};

inline MovingBump jumping_bump(double eps, double t0, double tau, double lambda, const Point& a, const Point& b,
                               double sigma0, int d = 2) {
  JumpRadius R{sigma0, tau, lambda, t0};
  MovingBump mb;
  mb.eps = eps;
  mb.r = [R](double t) { return R(t); };
  mb.dr = [R](double t) { return R.derivative(t); };
  mb.s = [=](double t) {
    if (t < t0 - lambda) return a;
    if (t >= t0) return b;
    return geodesic_point(a, b, d, (t - t0 + lambda) / lambda);
  };
  mb.ds = [=](double t) {
    if (t < t0 - lambda || t >= t0) return Point{0, 0, 0};
    Point v = geodesic_velocity(a, b, d, (t - t0 + lambda) / lambda);
    for (double& x : v) x /= lambda;
    return v;
  };
  return mb;
}

inline std::vector<double> jump_breakpoints(double t0, double tau, double lambda, double T) {
  std::vector<double> out;
  for (double q : {1.5, 2.0}) {
    out.push_back(t0 - lambda - q * q * tau * tau);
    out.push_back(t0 + q * q * tau * tau);
  }
  out.push_back(t0 - lambda);
  out.push_back(t0);
  std::vector<double> kept;
  for (double t : out)
    if (t > 0.0 && t < T) kept.push_back(t);
  return kept;
}

struct Jump2D {
  BumpField path;
  RelaxedMeasure limit;
  double tau = 0.0;
  std::vector<double> lambda;
  std::vector<std::string> warnings;
};

inline Jump2D build_jump_2d(const JumpSpec2D& spec) {
  spec.validate();
  Jump2D out;
  out.tau = spec.tau();
  std::vector<MovingBump> bumps, limit_bumps;
  std::vector<double> breaks, limit_breaks;
  for (int k = 0; k < spec.n; ++k) {
    double lam = spec.lambda(k);
    out.lambda.push_back(lam);
    double t0 = spec.t[k];
    if (t0 - lam - 4.0 * out.tau * out.tau <= 0.0 || t0 + 4.0 * out.tau * out.tau >= spec.T)
      out.warnings.push_back("transition window of jump " + std::to_string(k) + " leaves (0, T)");
    bumps.push_back(jumping_bump(spec.eps[k], t0, out.tau, lam, spec.a[k], spec.b[k], spec.sigma0));
    for (double t : jump_breakpoints(t0, out.tau, lam, spec.T)) breaks.push_back(t);

    MovingBump lb;
    lb.eps = spec.eps[k];
    double s0 = spec.sigma0;
    lb.r = [s0, t0](double t) { return s0 * std::sqrt(std::abs(t - t0)); };
    lb.dr = [s0, t0](double t) {
      double a = std::abs(t - t0);
      return a == 0.0 ? 0.0 : s0 * (t > t0 ? 1.0 : -1.0) / (2.0 * std::sqrt(a));
    };
    Point a = spec.a[k], b = spec.b[k];
    lb.s = [a, b, t0](double t) { return t < t0 ? a : b; };
    lb.ds = [](double) { return Point{0, 0, 0}; };
    limit_bumps.push_back(lb);
    limit_breaks.push_back(t0);
  }
  out.path = BumpField(2, spec.T, 1.0, bumps);
  out.path.breakpoints = breaks;

  // supports of different bumps must stay apart for the isolated-bump rates
  {
    const int samples = 2001;
    for (int i = 0; i < samples; ++i) {
      double t = spec.T * i / (samples - 1);
      for (int k = 0; k < spec.n; ++k)
        for (int j = 0; j < k; ++j) {
          double dist = std::sqrt(torus_dist2(bumps[k].s(t), bumps[j].s(t), 2));
          if (dist <= 0.5 * (bumps[k].r(t) + bumps[j].r(t))) {
            out.warnings.push_back("bumps " + std::to_string(j) + " and " + std::to_string(k) + " overlap");
            i = samples;
            k = spec.n;
            break;
          }
        }
    }
  }

  BumpField lim(2, spec.T, 1.0, limit_bumps);
  lim.breakpoints = limit_breaks;
  out.limit = lim.relaxed();
  for (int k = 0; k < spec.n; ++k)
    out.limit.slices.push_back({spec.t[k], {{spec.a[k], spec.eps[k]}}, {{spec.b[k], spec.eps[k]}}});
  std::sort(out.limit.slices.begin(), out.limit.slices.end(),
            [](const AtomSlice& x, const AtomSlice& y) { return x.t < y.t; });
  return out;
}

// eps^{1-theta}(1 + lambda/tau^{2-2theta}) + eps(1 + |log eps|) + tau^2/lambda
inline double inhomogeneous_bound(double eps, double tau, double lambda, double theta) {
  return std::pow(eps, 1.0 - theta) * (1.0 + lambda / std::pow(tau, 2.0 - 2.0 * theta)) +
         eps * (1.0 + std::abs(std::log(eps))) + tau * tau / lambda;
}

// sum_k [eps_k^{1-theta} + eps_k(1 + |log eps_k|)] + m^{-theta} sum_k eps_k^{(1-theta)/2}
inline double cost_envelope(const std::vector<double>& eps, int n, double theta, double m) {
  double a = 0.0, b = 0.0;
  for (int k = 0; k < n; ++k) {
    a += std::pow(eps[k], 1.0 - theta) + eps[k] * (1.0 + std::abs(std::log(eps[k])));
    b += std::pow(eps[k], 0.5 * (1.0 - theta));
  }
  return a + std::pow(m, -theta) * b;
}

// ---- d >= 3: relaxed targets with vanishing cost ----

struct Relaxed3DSpec {
  int d = 3;
  double T = 1.0;
  double c = 1.0;       // floor of the target
  double M = 10.0;      // cap on e(Xi)
  RelaxedMeasure target;
  std::function<double(int)> sigma = [](int n) { return 0.03 * std::pow(2.0 / n, 6); };
  int candidate_side = 16;  // quantization candidates per axis
  int surrogate_kmax = 4;   // W~ modes used by the quantizer
  int refine_sweeps = 3;
  int route_retries = 100;
  std::uint64_t seed = 1;

  // checks Xi >= c on a grid when the target exposes a density
  void validate(int grid = 8) const {
    if (d < 2 || d > 3) throw std::invalid_argument("relaxed construction needs d = 2 or 3");
    if (!target.spectrum) throw std::invalid_argument("target needs a spectrum");
    if (!(c > 0.0)) throw std::invalid_argument("floor c must be positive");
    if (target.energy > M) throw std::invalid_argument("target energy exceeds the mass cap");
    if (target.energy < c) throw std::invalid_argument("target energy is below the floor");
    if (target.density) {
      const std::size_t count = ipow(static_cast<std::size_t>(grid), d);
      for (int it = 0; it <= grid; ++it) {
        double t = T * it / grid;
        for (std::size_t j = 0; j < count; ++j) {
          auto ci = unflatten(j, d, grid);
          Point x{0, 0, 0};
          for (int a = 0; a < d; ++a) x[a] = (ci[a] + 0.5) / grid;
          if (target.density(t, x) < c * (1.0 - 1e-12)) throw std::invalid_argument("target drops below the floor c");
        }
      }
    }
  }
};

// Piecewise path through waypoints: legs of equal duration with smoothstep timing.
struct Route {
  std::vector<Point> waypoints;  // first = start, last = end
  int d = 3;

  Point at(double s) const {
    int legs = static_cast<int>(waypoints.size()) - 1;
    if (legs == 0) return waypoints.front();
    double x = std::clamp(s, 0.0, 1.0) * legs;
    int i = std::min(static_cast<int>(x), legs - 1);
    return geodesic_point(waypoints[i], waypoints[i + 1], d, x - i);
  }
  Point velocity(double s) const {
    int legs = static_cast<int>(waypoints.size()) - 1;
    if (legs == 0) return Point{0, 0, 0};
    double x = std::clamp(s, 0.0, 1.0) * legs;
    int i = std::min(static_cast<int>(x), legs - 1);
    Point v = geodesic_velocity(waypoints[i], waypoints[i + 1], d, x - i);
    for (double& c : v) c *= legs;
    return v;
  }
};

struct Relaxed3D {
  BumpField path;
  int n = 1;
  int L = 1;
  double tau = 0.0;
  double tau_prime = 0.0;
  double sigma = 0.0;
  double bump_mass = 0.0;
  std::vector<std::vector<Point>> centers;  // [phase][bump]
  std::vector<std::vector<Route>> routes;   // [transition][bump]
  std::vector<double> quantization_error;   // surrogate W~ per phase
  int reroutes = 0;
  std::vector<std::string> warnings;
};

namespace detail {

// Candidate grid points with their plane waves for the quantizer.
struct CandidateTable {
  std::vector<Point> x;
  std::vector<cplx> waves;  // [candidate * modes + mode]
};

inline CandidateTable make_candidates(const ModeSet& m, int side) {
  const int d = m.d;
  const std::size_t ncand = ipow(static_cast<std::size_t>(side), d);
  CandidateTable t;
  t.x.resize(ncand);
  t.waves.resize(ncand * m.size());
  for (std::size_t c = 0; c < ncand; ++c) {
    auto ci = unflatten(c, d, side);
    Point x{0, 0, 0};
    for (int a = 0; a < d; ++a) x[a] = (ci[a] + 0.5) / side;
    t.x[c] = x;
    for (std::size_t j = 0; j < m.size(); ++j) t.waves[c * m.size() + j] = plane_wave(m.k[j], x, d);
  }
  return t;
}

// Greedy insertion of L atoms of weight w on the candidate grid, followed by
// sweeps that re-place each atom given the others.
inline std::vector<Point> quantize(const Spectrum& target_excess, const ModeSet& m, const CandidateTable& table, int L,
                                   double w, int sweeps, double& err) {
  const std::size_t ncand = table.x.size();
  const auto& cand = table.x;
  const auto& waves = table.waves;
  std::vector<cplx> resid = target_excess;
  std::vector<std::size_t> chosen;
  auto objective = [&](std::size_t c) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.size(); ++j) s += m.weight[j] * std::abs(resid[j] - w * waves[c * m.size() + j]);
    return s;
  };
  auto place = [&](std::size_t c, double sign) {
    for (std::size_t j = 0; j < m.size(); ++j) resid[j] -= sign * w * waves[c * m.size() + j];
  };
  auto best_free = [&]() {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t c = 0; c < ncand; ++c) {
      if (std::find(chosen.begin(), chosen.end(), c) != chosen.end()) continue;
      double v = objective(c);
      if (v < best - 1e-14) {
        best = v;
        arg = c;
      }
    }
    return arg;
  };
  for (int l = 0; l < L; ++l) {
    std::size_t c = best_free();
    chosen.push_back(c);
    place(c, 1.0);
  }
  for (int sw = 0; sw < sweeps; ++sw) {
    bool moved = false;
    for (int l = 0; l < L; ++l) {
      std::size_t old = chosen[l];
      place(old, -1.0);
      chosen.erase(chosen.begin() + l);
      std::size_t c = best_free();
      chosen.insert(chosen.begin() + l, c);
      place(c, 1.0);
      if (c != old) moved = true;
    }
    if (!moved) break;
  }
  err = 0.0;
  for (std::size_t j = 0; j < m.size(); ++j) err += m.weight[j] * std::abs(resid[j]);
  std::vector<Point> out;
  for (auto c : chosen) out.push_back(cand[c]);
  return out;
}

// Assignment of next-phase centres minimizing total squared travel.
inline std::vector<int> match_centers(const std::vector<Point>& from, const std::vector<Point>& to, int d) {
  const int L = static_cast<int>(from.size());
  std::vector<int> perm(L);
  std::iota(perm.begin(), perm.end(), 0);
  auto cost = [&](const std::vector<int>& p) {
    double s = 0.0;
    for (int i = 0; i < L; ++i) s += torus_dist2(from[i], to[p[i]], d);
    return s;
  };
  if (L <= 9) {
    std::vector<int> best = perm;
    double bc = cost(perm);
    while (std::next_permutation(perm.begin(), perm.end())) {
      double c = cost(perm);
      if (c < bc) {
        bc = c;
        best = perm;
      }
    }
    return best;
  }
  // greedy nearest for larger L
  std::vector<bool> used(L, false);
  for (int i = 0; i < L; ++i) {
    double bd = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (int j = 0; j < L; ++j)
      if (!used[j] && torus_dist2(from[i], to[j], d) < bd) {
        bd = torus_dist2(from[i], to[j], d);
        arg = j;
      }
    used[arg] = true;
    perm[i] = arg;
  }
  return perm;
}

inline double min_route_separation(const std::vector<Route>& routes, int d, int samples = 513) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    double s = static_cast<double>(i) / (samples - 1);
    for (std::size_t a = 0; a < routes.size(); ++a) {
      Point pa = routes[a].at(s);
      for (std::size_t b = 0; b < a; ++b) best = std::min(best, std::sqrt(torus_dist2(pa, routes[b].at(s), d)));
    }
  }
  return best;
}

}  // namespace detail

inline Relaxed3D build_relaxed_3d(const Relaxed3DSpec& spec, int n) {
  spec.validate();
  if (n < 1) throw std::invalid_argument("n must be positive");
  const int d = spec.d;
  Relaxed3D out;
  out.n = n;
  out.L = n;
  out.tau = spec.T / n;
  out.tau_prime = spec.T / (static_cast<double>(n) * n);
  out.sigma = spec.sigma(n);
  const double excess = spec.target.energy - spec.c;
  out.bump_mass = excess / out.L;

  // Steps 1-2: time averages over I_k, quantized by atoms of weight m/L
  ModeSet qm = make_modes(d, spec.surrogate_kmax);
  const detail::CandidateTable table = detail::make_candidates(qm, spec.candidate_side);
  const GaussRule& g = gauss_legendre(16);
  for (int k = 0; k < n; ++k) {
    double a = k * out.tau, b = (k + 1) * out.tau;
    Spectrum avg(qm.size(), cplx(0.0, 0.0));
    const int panels = 4;
    double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p)
      for (std::size_t i = 0; i < g.x.size(); ++i) {
        double t = a + (p + 0.5) * h + 0.5 * h * g.x[i];
        Spectrum s = spec.target.spectrum(t, qm);
        for (std::size_t j = 0; j < qm.size(); ++j) avg[j] += 0.5 * h * g.w[i] * s[j] / (b - a);
      }
    avg[0] -= spec.c;
    double err = 0.0;
    auto pts = detail::quantize(avg, qm, table, out.L, out.bump_mass, spec.refine_sweeps, err);
    out.quantization_error.push_back(err);
    out.centers.push_back(pts);
  }
  // relabel each phase to follow the previous one
  for (int k = 1; k < n; ++k) {
    auto perm = detail::match_centers(out.centers[k - 1], out.centers[k], d);
    std::vector<Point> re(out.L);
    for (int l = 0; l < out.L; ++l) re[l] = out.centers[k][perm[l]];
    out.centers[k] = re;
  }
  // separation of static centres
  for (const auto& ph : out.centers)
    for (std::size_t a = 0; a < ph.size(); ++a)
      for (std::size_t b = 0; b < a; ++b)
        if (!(out.sigma < 0.5 * std::sqrt(torus_dist2(ph[a], ph[b], d))))
          throw NumericFailure("sigma is not below half the centre separation; reduce L or re-quantize");

  // Step 3: transition routes, re-routed through random waypoints on conflict
  Rng rng(spec.seed, 0x726f757465ULL);
  for (int k = 0; k + 1 < n; ++k) {
    std::vector<Route> rs(out.L);
    for (int l = 0; l < out.L; ++l) rs[l] = Route{{out.centers[k][l], out.centers[k + 1][l]}, d};
    int tries = 0;
    while (!(detail::min_route_separation(rs, d) > 2.0 * out.sigma)) {
      if (++tries > spec.route_retries) throw NumericFailure("could not route transition paths without collisions");
      ++out.reroutes;
      // re-route the pair at closest approach
      double best = std::numeric_limits<double>::infinity();
      int worst = 0;
      for (int i = 0; i < 513; ++i) {
        double s = i / 512.0;
        for (int a = 0; a < out.L; ++a)
          for (int b = 0; b < a; ++b) {
            double dist = std::sqrt(torus_dist2(rs[a].at(s), rs[b].at(s), d));
            if (dist < best) {
              best = dist;
              worst = a;
            }
          }
      }
      Point w{0, 0, 0};
      for (int a = 0; a < d; ++a) w[a] = rng.uniform();
      rs[worst] = Route{{out.centers[k][worst], w, out.centers[k + 1][worst]}, d};
    }
    out.routes.push_back(rs);
  }

  // Step 4: the smooth path
  std::vector<MovingBump> bumps;
  const double tau = out.tau, tp = out.tau_prime, sigma = out.sigma;
  auto centers = std::make_shared<std::vector<std::vector<Point>>>(out.centers);
  auto routes = std::make_shared<std::vector<std::vector<Route>>>(out.routes);
  auto locate = [tau, tp, n](double t, int& k, double& s) {
    // k: phase index, s in [0,1] inside a transition (negative when static)
    k = std::clamp(static_cast<int>(std::floor(t / tau)), 0, n - 1);
    double end = (k + 1) * tau;
    if (k + 1 < n && t > end - tp) {
      s = (t - end + tp) / tp;
    } else {
      s = -1.0;
    }
  };
  for (int l = 0; l < out.L; ++l) {
    MovingBump mb;
    mb.eps = out.bump_mass;
    mb.r = [sigma](double) { return sigma; };
    mb.dr = [](double) { return 0.0; };
    mb.s = [=](double t) {
      int k;
      double s;
      locate(t, k, s);
      if (s < 0.0) return (*centers)[k][l];
      return (*routes)[k][l].at(s);
    };
    mb.ds = [=](double t) {
      int k;
      double s;
      locate(t, k, s);
      if (s < 0.0) return Point{0, 0, 0};
      Point v = (*routes)[k][l].velocity(s);
      for (double& x : v) x /= tp;
      return v;
    };
    bumps.push_back(mb);
  }
  out.path = BumpField(d, spec.T, spec.c, bumps);
  for (int k = 1; k < n; ++k) {
    out.path.breakpoints.push_back(k * tau - tp);
    out.path.breakpoints.push_back(k * tau);
    // waypoint legs switch at the midpoint
    out.path.breakpoints.push_back(k * tau - 0.5 * tp);
  }
  return out;
}

// Periodized Gaussian bumps moving with constant velocity over a floor c.
struct GaussianTrack {
  Point start{0, 0, 0};
  Point velocity{0, 0, 0};
  double mass = 0.5;
  double width = 0.12;
};

inline RelaxedMeasure moving_gaussians(int d, double T, double c, std::vector<GaussianTrack> tracks) {
  RelaxedMeasure xi;
  xi.d = d;
  xi.T = T;
  xi.energy = c;
  for (const auto& g : tracks) xi.energy += g.mass;
  auto centre = [d](const GaussianTrack& g, double t) {
    Point p{0, 0, 0};
    for (int a = 0; a < d; ++a) p[a] = wrap01(g.start[a] + g.velocity[a] * t);
    return p;
  };
  xi.spectrum = [=](double t, const ModeSet& m) {
    Spectrum s(m.size(), cplx(0.0, 0.0));
    s[0] = c;
    for (const auto& g : tracks) {
      Point p = centre(g, t);
      for (std::size_t j = 0; j < m.size(); ++j) {
        double k = mode_norm(m.k[j], d);
        s[j] += g.mass * std::exp(-2.0 * kPi * kPi * g.width * g.width * k * k) * plane_wave(m.k[j], p, d);
      }
    }
    return s;
  };
  xi.density = [=](double t, const Point& x) {
    double v = c;
    const double norm = std::pow(kTwoPi, -0.5 * d);
    for (const auto& g : tracks) {
      Point p = centre(g, t);
      // periodized sum over the nearest images
      double s = 0.0;
      const int R = 2;
      const std::size_t count = ipow(static_cast<std::size_t>(2 * R + 1), d);
      for (std::size_t j = 0; j < count; ++j) {
        auto o = unflatten(j, d, 2 * R + 1);
        double r2 = 0.0;
        for (int a = 0; a < d; ++a) {
          double z = torus_delta(p[a], x[a]) + (o[a] - R);
          r2 += z * z;
        }
        s += std::exp(-0.5 * r2 / (g.width * g.width));
      }
      v += g.mass * norm * std::pow(g.width, -d) * s;
    }
    return v;
  };
  return xi;
}

// Uniform target (c + mass) dt dx.
inline RelaxedMeasure uniform_target(int d, double T, double level) {
  RelaxedMeasure xi;
  xi.d = d;
  xi.T = T;
  xi.energy = level;
  xi.spectrum = [level](double, const ModeSet& m) {
    Spectrum s(m.size(), cplx(0.0, 0.0));
    s[0] = level;
    return s;
  };
  xi.density = [level](double, const Point&) { return level; };
  return xi;
}

// Space-time W~ between two relaxed measures.
inline double relaxed_distance(const RelaxedMeasure& a, const RelaxedMeasure& b, int kmax, int k0max,
                               int nodes = 16, int panels = 4) {
  if (a.d != b.d || a.T != b.T) throw std::invalid_argument("relaxed measures live on different domains");
  SpaceTimeModes st = make_space_time_modes(a.d, kmax, k0max, a.T);
  std::vector<double> br = a.breakpoints;
  br.insert(br.end(), b.breakpoints.begin(), b.breakpoints.end());
  const ModeSet& sm = st.space;
  SliceSpectrum diff = [&](double t) {
    Spectrum x = a.spectrum(t, sm), y = b.spectrum(t, sm);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] -= y[j];
    return x;
  };
  Spectrum D = space_time_spectrum(diff, st, br, nodes, panels);
  Spectrum zero(D.size(), cplx(0.0, 0.0));
  return space_time_distance(D, zero, st);
}

// ---- a regular path for the tilted-dynamics checks ----

// u = 1 + (1/2) e^{-2 pi^2 t} cos(2 pi x0) + a sin(pi t / T) sin(2 pi x0):
// heat flow plus a mild drift bump that starts and ends at zero.
inline SmoothPath regular_test_path(int d = 1, double T = 0.05, double a = 0.1) {
  SmoothPath p;
  p.d = d;
  p.T = T;
  p.m = 0.5 - a;
  p.M = 1.5 + a;
  p.u = [T, a](double t, const Point& x) {
    return 1.0 + 0.5 * std::exp(-2 * kPi * kPi * t) * std::cos(kTwoPi * x[0]) +
           a * std::sin(kPi * t / T) * std::sin(kTwoPi * x[0]);
  };
  p.dudt = [T, a](double t, const Point& x) {
    return -kPi * kPi * std::exp(-2 * kPi * kPi * t) * std::cos(kTwoPi * x[0]) +
           a * kPi / T * std::cos(kPi * t / T) * std::sin(kTwoPi * x[0]);
  };
  p.grad = [T, a](double t, const Point& x) {
    Point g{0, 0, 0};
    g[0] = -kPi * std::exp(-2 * kPi * kPi * t) * std::sin(kTwoPi * x[0]) +
           a * std::sin(kPi * t / T) * kTwoPi * std::cos(kTwoPi * x[0]);
    return g;
  };
  return p;
}

}  // namespace kmplab
