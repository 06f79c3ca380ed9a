#pragma once

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <memory>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "kmplab/common.hpp"
#include "kmplab/quadrature.hpp"

namespace kmplab {

// Surface area of the unit sphere in R^d (d = 1 counts the two endpoints).
inline double sphere_area(int d) {
  switch (d) {
    case 1: return 2.0;
    case 2: return kTwoPi;
    case 3: return 2.0 * kTwoPi;
    default: throw std::invalid_argument("dimension must be 1, 2 or 3");
  }
}

// Radial integral omega_d int_0^R f(y) y^{d-1} dy by composite Gauss rules.
template <class F>
double radial_integral(int d, F&& f, double R = 0.5, int panels = 64, int nodes = 32) {
  return sphere_area(d) *
         integrate_gl([&](double y) { return f(y) * std::pow(y, d - 1); }, 0.0, R, nodes, panels);
}

// Normalized bump rho(x) = exp(-1/(1/4 - |x|^2)) / Z_d on |x| < 1/2.
class Mollifier {
 public:
  explicit Mollifier(int d = 1) : d_(d) {
    if (d < 1 || d > 3) throw std::invalid_argument("mollifier dimension must be 1, 2 or 3");
    logZ_ = std::log(radial_integral(d, [](double y) { return raw(y); }, 0.5, 256));
  }

  int d() const { return d_; }
  double support_radius() const { return 0.5; }
  double log_norm() const { return logZ_; }

  // log rho at radius y (-inf outside the support)
  double log_profile(double y) const {
    double q = 0.25 - y * y;
    if (q <= 0.0) return -INFINITY;
    return -1.0 / q - logZ_;
  }
  double profile(double y) const {
    double q = 0.25 - y * y;
    return q <= 0.0 ? 0.0 : std::exp(-1.0 / q - logZ_);
  }
  // d/dy log rho = -2y / (1/4 - y^2)^2
  double dlog(double y) const {
    double q = 0.25 - y * y;
    return -2.0 * y / (q * q);
  }
  double dprofile(double y) const {
    double p = profile(y);
    return p == 0.0 ? 0.0 : p * dlog(y);
  }

  // rho_sigma(z) = sigma^{-d} rho(|z| / sigma)
  double scaled(double r, double sigma) const { return std::pow(sigma, -d_) * profile(r / sigma); }
  double scaled_dr(double r, double sigma) const { return std::pow(sigma, -d_ - 1) * dprofile(r / sigma); }
  // d/dsigma rho_sigma at radius r
  double scaled_dsigma(double r, double sigma) const {
    double y = r / sigma;
    return -std::pow(sigma, -d_ - 1) * (d_ * profile(y) + y * dprofile(y));
  }

  // int |grad rho|^2 / rho^{1+theta}
  double c_theta(double theta) const {
    return radial_integral(d_, [&](double y) {
      double lp = log_profile(y);
      if (!std::isfinite(lp)) return 0.0;
      double g = dlog(y);
      return std::exp((1.0 - theta) * lp) * g * g;
    }, 0.5, 512);
  }
  // int |grad rho|^2 / rho^{2-theta}
  double power_law_integral(double theta, int panels = 512) const {
    return radial_integral(d_, [&](double y) {
      double lp = log_profile(y);
      if (!std::isfinite(lp)) return 0.0;
      double g = dlog(y);
      return std::exp(theta * lp) * g * g;
    }, 0.5, panels);
  }

  // hat rho(k) = int rho(x) exp(-2 pi i k.x) dx as a function of |k|.
  double fourier(double kabs) const {
    const double w = kTwoPi * kabs;
    auto f = [&](double y) {
      double p = profile(y);
      switch (d_) {
        case 1: return 2.0 * p * std::cos(w * y);
        case 2: return kTwoPi * p * boost::math::cyl_bessel_j(0, w * y) * y;
        default: {
          double s = w * y == 0.0 ? 1.0 : std::sin(w * y) / (w * y);
          return 2.0 * kTwoPi * p * s * y * y;
        }
      }
    };
    int panels = 32 + static_cast<int>(std::ceil(std::abs(kabs)));
    return integrate_gl(f, 0.0, 0.5, 32, panels);
  }

 private:
  static double raw(double y) {
    double q = 0.25 - y * y;
    return q <= 0.0 ? 0.0 : std::exp(-1.0 / q);
  }

  int d_;
  double logZ_ = 0.0;
};

// Shared instance per dimension.
inline const Mollifier& mollifier(int d) {
  static std::mutex m;
  static std::map<int, Mollifier> cache;
  std::lock_guard<std::mutex> lock(m);
  auto it = cache.find(d);
  if (it == cache.end()) it = cache.emplace(d, Mollifier(d)).first;
  return it->second;
}

// hat rho(q) tabulated on [0, 64] by a cubic B-spline; exact evaluation beyond.
class FourierTable {
 public:
  explicit FourierTable(int d) : d_(d) {
    const Mollifier& mol = mollifier(d);
    std::vector<double> v(kPoints);
    for (int i = 0; i < kPoints; ++i) v[i] = mol.fourier(i * kStep);
    // endpoint slopes: hat rho is even, and at the far end use a one-sided difference
    double right = (v[kPoints - 1] - v[kPoints - 2]) / kStep;
    spline_ = std::make_unique<boost::math::interpolators::cardinal_cubic_b_spline<double>>(
        v.begin(), v.end(), 0.0, kStep, 0.0, right);
  }
  double operator()(double q) const {
    q = std::abs(q);
    if (q >= kStep * (kPoints - 1)) return mollifier(d_).fourier(q);
    return (*spline_)(q);
  }

 private:
  static constexpr int kPoints = 4097;
  static constexpr double kStep = 1.0 / 64.0;
  int d_;
  std::unique_ptr<boost::math::interpolators::cardinal_cubic_b_spline<double>> spline_;
};

inline const FourierTable& fourier_table(int d) {
  static std::mutex m;
  static std::map<int, std::unique_ptr<FourierTable>> cache;
  std::lock_guard<std::mutex> lock(m);
  auto& slot = cache[d];
  if (!slot) slot = std::make_unique<FourierTable>(d);
  return *slot;
}

// Temporal cutoff: psi = 1 on t <= 3/2, psi = t on t >= 2. On [3/2, 2],
// psi' = S(s) + 1.5 B(s) with s = 2(t - 3/2), S the quintic smoothstep and
// B = 140 s^3 (1-s)^3, which makes psi(2) = 2 and psi C^3.
struct TemporalCutoff {
  static double value(double t) {
    if (t <= 1.5) return 1.0;
    if (t >= 2.0) return t;
    double s = 2.0 * (t - 1.5);
    double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s, s6 = s5 * s, s7 = s6 * s;
    double intS = s6 - 3.0 * s5 + 2.5 * s4;
    double intB = 140.0 * (s4 / 4.0 - 3.0 * s5 / 5.0 + s6 / 2.0 - s7 / 7.0);
    return 1.0 + 0.5 * (intS + 1.5 * intB);
  }
  static double derivative(double t) {
    if (t <= 1.5) return 0.0;
    if (t >= 2.0) return 1.0;
    double s = 2.0 * (t - 1.5);
    double S = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    double B = 140.0 * s * s * s * (1 - s) * (1 - s) * (1 - s);
    return S + 1.5 * B;
  }
  static double second_derivative(double t) {
    if (t <= 1.5 || t >= 2.0) return 0.0;
    double s = 2.0 * (t - 1.5);
    double w = s * s * (1 - s) * (1 - s);
    return 2.0 * (30.0 * w + 1.5 * 420.0 * w * (1 - 2 * s));
  }
};

// Smoothstep with all derivatives vanishing at 0 and 1:
// S(s) = f(s) / (f(s) + f(1-s)), f(s) = exp(-1/s).
struct Smoothstep {
  static double value(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    // ratio f(1-s)/f(s) = exp(1/s - 1/(1-s))
    double e = 1.0 / s - 1.0 / (1.0 - s);
    if (e > 700.0) return 0.0;
    return 1.0 / (1.0 + std::exp(e));
  }
  static double derivative(double s) {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    double e = 1.0 / s - 1.0 / (1.0 - s);
    if (std::abs(e) > 700.0) return 0.0;
    double S = 1.0 / (1.0 + std::exp(e));
    // dS/ds = S (1-S) (1/s^2 + 1/(1-s)^2)
    return S * (1.0 - S) * (1.0 / (s * s) + 1.0 / ((1.0 - s) * (1.0 - s)));
  }
};

// Optimal translation cost of a radial bump u = c + A rho(|z|) in scaled
// coordinates z = (x - s)/r moving with unit velocity. The potential is
// H = r (e.z_hat) A eta(|z|) with
//   (y^{d-1} a eta')' - (d-1) y^{d-3} a eta = y^{d-1} rho'(y),  a = (c + A rho)^2,
// eta(0) = 0 and the decaying exterior condition eta' = (1-d) eta / y at y = 1/2.
// Returns Q = -int eta rho' y^{d-1} dy; the cost rate for velocity V is
//   (1/2) r^d A^2 |V|^2 (omega_d / d) Q.
inline double dipole_coefficient(int d, double c, double A, int M = 4000) {
  if (d < 2) throw std::invalid_argument("dipole problem needs d >= 2");
  const Mollifier& mol = mollifier(d);
  const double h = 0.5 / M;
  auto a_of = [&](double y) {
    double v = c + A * mol.profile(y);
    return v * v;
  };
  auto p_of = [&](double y) { return std::pow(y, d - 1) * a_of(y); };
  // unknowns eta_1..eta_M
  std::vector<double> lo(M + 1, 0.0), di(M + 1, 0.0), up(M + 1, 0.0), rhs(M + 1, 0.0);
  for (int i = 1; i < M; ++i) {
    double y = i * h;
    double pl = p_of(y - 0.5 * h), pr = p_of(y + 0.5 * h);
    double q = (d - 1) * std::pow(y, d - 3) * a_of(y);
    lo[i] = pl / (h * h);
    up[i] = pr / (h * h);
    di[i] = -(pl + pr) / (h * h) - q;
    rhs[i] = std::pow(y, d - 1) * mol.dprofile(y);
  }
  {
    double y = 0.5;
    double pl = p_of(y - 0.5 * h);
    double pb = p_of(y);
    double q = (d - 1) * std::pow(y, d - 3) * a_of(y);
    // half cell: [pb * (1-d)/y * eta_M - pl (eta_M - eta_{M-1})/h] / (h/2) - q eta_M = 0
    lo[M] = pl / h / (0.5 * h);
    di[M] = (pb * (1.0 - d) / y - pl / h) / (0.5 * h) - q;
    rhs[M] = 0.0;
  }
  // Thomas algorithm, eta_0 = 0
  std::vector<double> cp(M + 1, 0.0), dp(M + 1, 0.0), eta(M + 1, 0.0);
  cp[1] = up[1] / di[1];
  dp[1] = rhs[1] / di[1];
  for (int i = 2; i <= M; ++i) {
    double den = di[i] - lo[i] * cp[i - 1];
    cp[i] = i < M ? up[i] / den : 0.0;
    dp[i] = (rhs[i] - lo[i] * dp[i - 1]) / den;
  }
  eta[M] = dp[M];
  for (int i = M - 1; i >= 1; --i) eta[i] = dp[i] - cp[i] * eta[i + 1];
  double Q = 0.0;
  for (int i = 1; i <= M; ++i) {
    double y = i * h;
    double w = i == M ? 0.5 : 1.0;
    Q -= w * h * eta[i] * mol.dprofile(y) * std::pow(y, d - 1);
  }
  return Q;
}

// Translation cost rate (1/2) int u^2 |grad H|^2 of c + eps rho_r(x - s) moving with speed |V|.
inline double dipole_cost_rate(int d, double c, double eps, double r, double speed, int M = 4000) {
  double A = eps / std::pow(r, d);
  return 0.5 * std::pow(r, d) * A * A * speed * speed * sphere_area(d) / d * dipole_coefficient(d, c, A, M);
}

// Cost rate of the radial part of c + eps rho_r(x - s) with radius rate rdot:
// g = (1/2) grad log u + (v/u) (rdot/r)(x - s), which is optimal for the
// radial component of the motion.
inline double radial_bump_rate(int d, double c, double eps, double r, double rdot, int panels = 256) {
  const Mollifier& mol = mollifier(d);
  const double A = eps / std::pow(r, d);
  return 0.5 * std::pow(r, d) * radial_integral(d, [&](double y) {
    double p = mol.profile(y);
    if (p == 0.0) return 0.0;
    double u = c + A * p;
    double g = A * mol.dprofile(y) / (2.0 * r * u) + A * p * rdot * y / u;
    return g * g;
  }, 0.5, panels);
}

}  // namespace kmplab
