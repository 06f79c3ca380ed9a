#pragma once

#include <boost/math/special_functions/legendre.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <vector>

namespace kmplab {

struct GaussRule {
  std::vector<double> x;  // nodes on [-1,1]
  std::vector<double> w;
};

// n-point Gauss-Legendre rule, cached per n.
inline const GaussRule& gauss_legendre(int n) {
  static std::map<int, GaussRule> cache;
  static std::mutex m;
  std::lock_guard<std::mutex> lock(m);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  GaussRule r;
  auto zeros = boost::math::legendre_p_zeros<double>(n);  // nonnegative zeros
  for (double z : zeros) {
    double dp = boost::math::legendre_p_prime(n, z);
    double w = 2.0 / ((1.0 - z * z) * dp * dp);
    if (z == 0.0) {
      r.x.push_back(0.0);
      r.w.push_back(w);
    } else {
      r.x.push_back(z);
      r.w.push_back(w);
      r.x.push_back(-z);
      r.w.push_back(w);
    }
  }
  std::vector<std::size_t> order(r.x.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r.x[a] < r.x[b]; });
  GaussRule s;
  for (auto i : order) {
    s.x.push_back(r.x[i]);
    s.w.push_back(r.w[i]);
  }
  return cache.emplace(n, std::move(s)).first->second;
}

// Composite Gauss-Legendre over [a,b] with `panels` equal panels.
template <class F>
double integrate_gl(F&& f, double a, double b, int nodes = 16, int panels = 1) {
  const GaussRule& g = gauss_legendre(nodes);
  double h = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    double lo = a + p * h;
    double mid = lo + 0.5 * h;
    double s = 0.0;
    for (std::size_t i = 0; i < g.x.size(); ++i) s += g.w[i] * f(mid + 0.5 * h * g.x[i]);
    total += 0.5 * h * s;
  }
  return total;
}

// A time segment whose endpoints may carry an inverse-square-root singularity.
struct TimeSegment {
  double a = 0.0;
  double b = 0.0;
  bool singular_left = false;
  bool singular_right = false;
};

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  std::size_t evaluations = 0;
};

// Splits [0,T] at the breakpoints and marks segments adjacent to singular times.
inline std::vector<TimeSegment> make_segments(double t0, double t1, std::vector<double> breaks,
                                              const std::vector<double>& singular) {
  breaks.push_back(t0);
  breaks.push_back(t1);
  for (double s : singular) breaks.push_back(s);
  std::sort(breaks.begin(), breaks.end());
  std::vector<double> pts;
  for (double b : breaks) {
    if (b < t0 || b > t1) continue;
    if (pts.empty() || b - pts.back() > 1e-15 * std::max(1.0, std::abs(t1))) pts.push_back(b);
  }
  auto is_sing = [&](double t) {
    for (double s : singular)
      if (std::abs(s - t) <= 1e-15 * std::max(1.0, std::abs(t1))) return true;
    return false;
  };
  std::vector<TimeSegment> segs;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    TimeSegment s{pts[i], pts[i + 1], is_sing(pts[i]), is_sing(pts[i + 1])};
    if (s.singular_left && s.singular_right) {
      double m = 0.5 * (s.a + s.b);
      segs.push_back({s.a, m, true, false});
      segs.push_back({m, s.b, false, true});
    } else {
      segs.push_back(s);
    }
  }
  return segs;
}

// Integral over one segment with `panels` panels of `nodes` Gauss points each;
// singular endpoints use t = t0 +- s^2.
template <class F>
double integrate_segment(F& f, const TimeSegment& s, int nodes, int panels, std::size_t& evals) {
  evals += static_cast<std::size_t>(nodes) * panels;
  if (s.singular_left) {
    double L = std::sqrt(s.b - s.a);
    return integrate_gl([&](double u) { return 2.0 * u * f(s.a + u * u); }, 0.0, L, nodes, panels);
  }
  if (s.singular_right) {
    double L = std::sqrt(s.b - s.a);
    return integrate_gl([&](double u) { return 2.0 * u * f(s.b - u * u); }, 0.0, L, nodes, panels);
  }
  return integrate_gl(f, s.a, s.b, nodes, panels);
}

// Composite Gauss quadrature in time: `nodes` per panel, panel count doubled
// per segment until the relative change drops below rel_tol.
template <class F>
QuadratureResult adaptive_time_integral(F&& f, const std::vector<TimeSegment>& segs, int nodes = 64,
                                        double rel_tol = 1e-4, double abs_tol = 1e-14,
                                        int max_doublings = 10) {
  QuadratureResult out;
  for (const auto& s : segs) {
    int panels = 1;
    double prev = integrate_segment(f, s, nodes, panels, out.evaluations);
    double cur = prev;
    double err = std::abs(prev);
    for (int k = 0; k < max_doublings; ++k) {
      panels *= 2;
      cur = integrate_segment(f, s, nodes, panels, out.evaluations);
      err = std::abs(cur - prev);
      if (err <= rel_tol * std::abs(cur) || err <= abs_tol) break;
      prev = cur;
    }
    out.value += cur;
    out.error_estimate += err;
  }
  return out;
}

}  // namespace kmplab
