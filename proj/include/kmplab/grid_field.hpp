#pragma once

#include <algorithm>
#include <array>
#include <memory>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmplab/common.hpp"
#include "kmplab/spectral.hpp"

namespace kmplab {

// Periodic field on the uniform grid {j/n}^d of the unit torus; `components`
// is 1 for scalars and d for vector fields. Storage is component-major.
class GridField {
 public:
  GridField() = default;
  GridField(int d, int n, int components = 1, double fill = 0.0, std::string units = "")
      : d_(d), n_(n), comps_(components), units_(std::move(units)) {
    if (d < 1 || d > 3) throw std::invalid_argument("grid dimension must be 1, 2 or 3");
    if (n < 2) throw std::invalid_argument("grid side must be at least 2");
    if (components < 1) throw std::invalid_argument("component count must be positive");
    nodes_ = ipow(static_cast<std::size_t>(n), d);
    v_.assign(nodes_ * static_cast<std::size_t>(comps_), fill);
  }

  template <class F>
  static GridField sample(int d, int n, F&& f, std::string units = "") {
    GridField g(d, n, 1, 0.0, std::move(units));
    for (std::size_t i = 0; i < g.nodes_; ++i) g.v_[i] = f(g.point(i));
    return g;
  }

  int d() const { return d_; }
  int n() const { return n_; }
  int components() const { return comps_; }
  std::size_t nodes() const { return nodes_; }
  double spacing() const { return 1.0 / n_; }
  const std::string& units() const { return units_; }
  void set_units(std::string u) { units_ = std::move(u); }
  bool empty() const { return nodes_ == 0; }

  double& operator()(std::size_t node, int c = 0) { return v_[static_cast<std::size_t>(c) * nodes_ + node]; }
  double operator()(std::size_t node, int c = 0) const { return v_[static_cast<std::size_t>(c) * nodes_ + node]; }
  std::vector<double>& data() { return v_; }
  const std::vector<double>& data() const { return v_; }

  Point point(std::size_t node) const {
    auto c = unflatten(node, d_, n_);
    Point p{0.0, 0.0, 0.0};
    for (int i = 0; i < d_; ++i) p[i] = static_cast<double>(c[i]) / n_;
    return p;
  }

  GridField component(int c) const {
    GridField g(d_, n_, 1, 0.0, units_);
    std::copy(v_.begin() + static_cast<std::ptrdiff_t>(c * nodes_),
              v_.begin() + static_cast<std::ptrdiff_t>((c + 1) * nodes_), g.v_.begin());
    return g;
  }
  void set_component(int c, const GridField& s) {
    std::copy(s.v_.begin(), s.v_.begin() + static_cast<std::ptrdiff_t>(nodes_),
              v_.begin() + static_cast<std::ptrdiff_t>(c * nodes_));
  }

  // Integral over the unit torus (scalar component c).
  double integral(int c = 0) const {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes_; ++i) s += (*this)(i, c);
    return s / static_cast<double>(nodes_);
  }
  double mean(int c = 0) const { return integral(c); }
  double min() const { return *std::min_element(v_.begin(), v_.end()); }
  double max() const { return *std::max_element(v_.begin(), v_.end()); }
  double max_abs() const {
    double m = 0.0;
    for (double x : v_) m = std::max(m, std::abs(x));
    return m;
  }
  // Pointwise Euclidean norm of a vector field.
  GridField norm() const {
    GridField g(d_, n_, 1);
    for (std::size_t i = 0; i < nodes_; ++i) {
      double s = 0.0;
      for (int c = 0; c < comps_; ++c) s += (*this)(i, c) * (*this)(i, c);
      g(i) = std::sqrt(s);
    }
    return g;
  }
  // L^2 inner product over the torus, summed over components.
  double dot(const GridField& o) const {
    check_same(o);
    double s = 0.0;
    for (std::size_t i = 0; i < v_.size(); ++i) s += v_[i] * o.v_[i];
    return s / static_cast<double>(nodes_);
  }

  GridField& operator+=(const GridField& o) {
    check_same(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
  }
  GridField& operator-=(const GridField& o) {
    check_same(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
    return *this;
  }
  GridField& operator*=(double a) {
    for (double& x : v_) x *= a;
    return *this;
  }
  void axpy(double a, const GridField& o) {
    check_same(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += a * o.v_[i];
  }
  friend GridField operator+(GridField a, const GridField& b) { return a += b; }
  friend GridField operator-(GridField a, const GridField& b) { return a -= b; }
  friend GridField operator*(double s, GridField a) { return a *= s; }

  // Periodic tensor Catmull-Rom interpolation; exact at nodes.
  double interpolate(const Point& x, int c = 0) const {
    std::array<int, 3> base{0, 0, 0};
    std::array<std::array<double, 4>, 3> w{};
    for (int i = 0; i < 3; ++i) w[i] = {0.0, 1.0, 0.0, 0.0};
    for (int i = 0; i < d_; ++i) {
      double s = wrap01(x[i]) * n_;
      int j = static_cast<int>(std::floor(s));
      double f = s - j;
      base[i] = j;
      double f2 = f * f, f3 = f2 * f;
      w[i] = {-0.5 * f3 + f2 - 0.5 * f, 1.5 * f3 - 2.5 * f2 + 1.0, -1.5 * f3 + 2.0 * f2 + 0.5 * f, 0.5 * f3 - 0.5 * f2};
    }
    int span1 = d_ >= 2 ? 4 : 1, span2 = d_ >= 3 ? 4 : 1;
    double out = 0.0;
    for (int a2 = 0; a2 < span2; ++a2)
      for (int a1 = 0; a1 < span1; ++a1)
        for (int a0 = 0; a0 < 4; ++a0) {
          std::array<int, 3> idx{base[0] + a0 - 1, base[1] + (d_ >= 2 ? a1 - 1 : 0), base[2] + (d_ >= 3 ? a2 - 1 : 0)};
          for (int i = 0; i < d_; ++i) idx[i] = ((idx[i] % n_) + n_) % n_;
          double wt = w[0][a0] * (d_ >= 2 ? w[1][a1] : 1.0) * (d_ >= 3 ? w[2][a2] : 1.0);
          out += wt * (*this)(flatten(idx, d_, n_), c);
        }
    return out;
  }

  void check_same(const GridField& o) const {
    if (d_ != o.d_ || n_ != o.n_ || comps_ != o.comps_) throw std::invalid_argument("grid fields have different shapes");
  }

 private:
  int d_ = 1;
  int n_ = 0;
  int comps_ = 1;
  std::size_t nodes_ = 0;
  std::vector<double> v_;
  std::string units_;
};

// ---- spectral calculus on grid fields ----

inline std::vector<cplx> to_spectrum(const GridField& f, int c = 0) {
  std::vector<cplx> buf(f.nodes());
  for (std::size_t i = 0; i < f.nodes(); ++i) buf[i] = f(i, c);
  fft_forward(f.d(), f.n(), buf);
  return buf;
}

inline GridField from_spectrum(std::vector<cplx> spec, int d, int n) {
  fft_backward(d, n, spec);
  GridField g(d, n, 1);
  double inv = 1.0 / static_cast<double>(g.nodes());
  for (std::size_t i = 0; i < g.nodes(); ++i) g(i) = spec[i].real() * inv;
  return g;
}

// Applies a real Fourier multiplier m(k) given as a function of the signed
// integer wavevector.
template <class M>
GridField apply_multiplier(const GridField& f, M&& mult) {
  auto spec = to_spectrum(f);
  for (std::size_t i = 0; i < spec.size(); ++i) {
    auto c = unflatten(i, f.d(), f.n());
    std::array<int, 3> k{0, 0, 0};
    for (int a = 0; a < f.d(); ++a) k[a] = wavenumber(c[a], f.n());
    spec[i] *= mult(k);
  }
  return from_spectrum(std::move(spec), f.d(), f.n());
}

inline GridField gradient(const GridField& f) {
  GridField g(f.d(), f.n(), f.d());
  auto spec = to_spectrum(f);
  for (int a = 0; a < f.d(); ++a) {
    std::vector<cplx> s = spec;
    for (std::size_t i = 0; i < s.size(); ++i) {
      auto c = unflatten(i, f.d(), f.n());
      s[i] *= cplx(0.0, kTwoPi * derivative_wavenumber(c[a], f.n()));
    }
    g.set_component(a, from_spectrum(std::move(s), f.d(), f.n()));
  }
  return g;
}

inline GridField divergence(const GridField& v) {
  if (v.components() != v.d()) throw std::invalid_argument("divergence needs a vector field");
  std::vector<cplx> acc(v.nodes(), cplx(0.0, 0.0));
  for (int a = 0; a < v.d(); ++a) {
    auto s = to_spectrum(v, a);
    for (std::size_t i = 0; i < s.size(); ++i) {
      auto c = unflatten(i, v.d(), v.n());
      acc[i] += s[i] * cplx(0.0, kTwoPi * derivative_wavenumber(c[a], v.n()));
    }
  }
  return from_spectrum(std::move(acc), v.d(), v.n());
}

inline GridField laplacian(const GridField& f) {
  return apply_multiplier(f, [&](const std::array<int, 3>& k) {
    double s = 0.0;
    for (int a = 0; a < f.d(); ++a) s += static_cast<double>(k[a]) * k[a];
    return -kTwoPi * kTwoPi * s;
  });
}

// Pointwise product of a scalar with every component of a field.
inline GridField scale_by(const GridField& s, const GridField& v) {
  GridField out = v;
  for (int c = 0; c < v.components(); ++c)
    for (std::size_t i = 0; i < v.nodes(); ++i) out(i, c) *= s(i);
  return out;
}

// ---- time series of fields with cubic Hermite interpolation in t ----

class TimeSeriesField {
 public:
  TimeSeriesField() = default;
  TimeSeriesField(std::vector<double> times, std::vector<GridField> slices)
      : t_(std::move(times)), f_(std::move(slices)) {
    if (t_.size() != f_.size() || t_.empty()) throw std::invalid_argument("time series needs matching nonempty slices");
    for (std::size_t i = 1; i < t_.size(); ++i)
      if (!(t_[i] > t_[i - 1])) throw std::invalid_argument("time series times must increase");
  }

  const std::vector<double>& times() const { return t_; }
  const std::vector<GridField>& slices() const { return f_; }
  std::size_t size() const { return t_.size(); }

  GridField at(double t) const { return eval(t, false); }
  GridField derivative(double t) const { return eval(t, true); }

 private:
  // Slope estimate at slice i (three-point, second order on uneven grids).
  GridField slope(std::size_t i) const {
    std::size_t n = t_.size();
    if (n == 1) return 0.0 * f_[0];
    if (n == 2) return (1.0 / (t_[1] - t_[0])) * (f_[1] - f_[0]);
    std::size_t a, b, c;
    if (i == 0) {
      a = 0; b = 1; c = 2;
    } else if (i == n - 1) {
      a = n - 3; b = n - 2; c = n - 1;
    } else {
      a = i - 1; b = i; c = i + 1;
    }
    double x = t_[i], xa = t_[a], xb = t_[b], xc = t_[c];
    // derivative of the quadratic through (a,b,c) at x
    double la = ((x - xb) + (x - xc)) / ((xa - xb) * (xa - xc));
    double lb = ((x - xa) + (x - xc)) / ((xb - xa) * (xb - xc));
    double lc = ((x - xa) + (x - xb)) / ((xc - xa) * (xc - xb));
    GridField s = la * f_[a];
    s.axpy(lb, f_[b]);
    s.axpy(lc, f_[c]);
    return s;
  }

  GridField eval(double t, bool deriv) const {
    std::size_t n = t_.size();
    if (n == 1) return deriv ? 0.0 * f_[0] : f_[0];
    t = std::clamp(t, t_.front(), t_.back());
    std::size_t i = static_cast<std::size_t>(std::upper_bound(t_.begin(), t_.end(), t) - t_.begin());
    if (i == 0) i = 1;
    if (i >= n) i = n - 1;
    double h = t_[i] - t_[i - 1];
    double s = (t - t_[i - 1]) / h;
    GridField m0 = slope(i - 1), m1 = slope(i);
    double h00, h10, h01, h11;
    if (!deriv) {
      h00 = 2 * s * s * s - 3 * s * s + 1;
      h10 = s * s * s - 2 * s * s + s;
      h01 = -2 * s * s * s + 3 * s * s;
      h11 = s * s * s - s * s;
      GridField out = h00 * f_[i - 1];
      out.axpy(h01, f_[i]);
      out.axpy(h10 * h, m0);
      out.axpy(h11 * h, m1);
      return out;
    }
    h00 = (6 * s * s - 6 * s) / h;
    h10 = 3 * s * s - 4 * s + 1;
    h01 = (-6 * s * s + 6 * s) / h;
    h11 = 3 * s * s - 2 * s;
    GridField out = h00 * f_[i - 1];
    out.axpy(h01, f_[i]);
    out.axpy(h10, m0);
    out.axpy(h11, m1);
    return out;
  }

  std::vector<double> t_;
  std::vector<GridField> f_;
};

// ---- paths and measures ----

using SpaceTimeScalar = std::function<double(double, const Point&)>;
using SpaceTimeVector = std::function<Point(double, const Point&)>;
using GridSampler = std::function<GridField(double, int)>;

// A strictly positive density path with evaluation closures. Grid samplers,
// when set, take precedence over pointwise sampling.
struct SmoothPath {
  int d = 1;
  double T = 0.0;
  double m = 0.0;  // inf u
  double M = 0.0;  // sup u
  SpaceTimeScalar u;
  SpaceTimeScalar dudt;
  SpaceTimeVector grad;
  GridSampler u_grid;
  GridSampler dudt_grid;
  std::vector<double> breakpoints;     // times where the integrand is not smooth
  std::vector<double> singular_times;  // times with |t - t0|^{-1/2} behaviour

  GridField sample_u(double t, int n) const {
    if (u_grid) return u_grid(t, n);
    return GridField::sample(d, n, [&](const Point& x) { return u(t, x); });
  }
  GridField sample_dudt(double t, int n) const {
    if (dudt_grid) return dudt_grid(t, n);
    return GridField::sample(d, n, [&](const Point& x) { return dudt(t, x); });
  }
  GridField sample_grad(double t, int n) const {
    if (!grad) return gradient(sample_u(t, n));
    GridField g(d, n, d);
    for (std::size_t i = 0; i < g.nodes(); ++i) {
      Point v = grad(t, g.point(i));
      for (int a = 0; a < d; ++a) g(i, a) = v[a];
    }
    return g;
  }
};

// Path backed by stored grid snapshots, cubic in time.
inline SmoothPath snapshot_path(const TimeSeriesField& series) {
  SmoothPath p;
  const GridField& f0 = series.slices().front();
  p.d = f0.d();
  p.T = series.times().back();
  p.m = f0.min();
  p.M = f0.max();
  for (const auto& s : series.slices()) {
    p.m = std::min(p.m, s.min());
    p.M = std::max(p.M, s.max());
  }
  auto shared = std::make_shared<TimeSeriesField>(series);
  int native = f0.n();
  auto resample = [native](const GridField& g, int n) {
    if (n == native) return g;
    return GridField::sample(g.d(), n, [&](const Point& x) { return g.interpolate(x); });
  };
  p.u_grid = [shared, resample](double t, int n) { return resample(shared->at(t), n); };
  p.dudt_grid = [shared, resample](double t, int n) { return resample(shared->derivative(t), n); };
  p.u = [shared](double t, const Point& x) { return shared->at(t).interpolate(x); };
  p.dudt = [shared](double t, const Point& x) { return shared->derivative(t).interpolate(x); };
  return p;
}

// Lebesgue decomposition: density on a grid plus atoms.
struct MeasureState {
  int d = 1;
  GridField density;  // may be empty
  std::vector<Atom> atoms;

  double total_mass() const {
    double s = density.empty() ? 0.0 : density.integral();
    for (const auto& a : atoms) s += a.w;
    return s;
  }
};

}  // namespace kmplab
