#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace kmplab {

using Point = std::array<double, 3>;

struct Atom {
  Point x{0.0, 0.0, 0.0};
  double w = 0.0;
};

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Thrown for malformed configurations (CLI exit code 2).
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a run would exceed its event or memory budget (exit code 3).
struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a solver cannot reach its tolerance (exit code 4).
struct NumericFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Periodic wrap of a coordinate into [0,1).
inline double wrap01(double x) {
  double y = x - std::floor(x);
  return y >= 1.0 ? 0.0 : y;
}

// Signed minimal-image displacement on the unit circle, in [-1/2, 1/2).
inline double torus_delta(double from, double to) {
  double dx = to - from;
  dx -= std::floor(dx + 0.5);
  return dx;
}

inline double torus_dist2(const Point& a, const Point& b, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    double dx = torus_delta(a[i], b[i]);
    s += dx * dx;
  }
  return s;
}

inline std::size_t ipow(std::size_t b, int e) {
  std::size_t r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

}  // namespace kmplab
