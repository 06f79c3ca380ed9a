#include <gtest/gtest.h>

#include <cmath>

#include "kmplab/grid_field.hpp"

using namespace kmplab;

TEST(GridField, SpectralRoundTrip) {
  auto f = GridField::sample(2, 16, [](const Point& x) { return std::exp(std::sin(kTwoPi * x[0]) + x[1] * (1 - x[1])); });
  auto back = from_spectrum(to_spectrum(f), 2, 16);
  for (std::size_t i = 0; i < f.nodes(); ++i) EXPECT_NEAR(back(i), f(i), 1e-12);
}

TEST(GridField, GradientDivergenceLaplacian) {
  auto f = GridField::sample(2, 32, [](const Point& x) { return std::sin(kTwoPi * x[0]) * std::cos(2 * kTwoPi * x[1]); });
  auto g = gradient(f);
  auto lap = laplacian(f);
  auto div = divergence(g);
  for (std::size_t i = 0; i < f.nodes(); ++i) {
    Point x = f.point(i);
    EXPECT_NEAR(g(i, 0), kTwoPi * std::cos(kTwoPi * x[0]) * std::cos(2 * kTwoPi * x[1]), 1e-10);
    EXPECT_NEAR(g(i, 1), -2 * kTwoPi * std::sin(kTwoPi * x[0]) * std::sin(2 * kTwoPi * x[1]), 1e-10);
    EXPECT_NEAR(lap(i), -5 * kTwoPi * kTwoPi * f(i), 1e-9);
    EXPECT_NEAR(div(i), lap(i), 1e-9);
  }
}

TEST(GridField, InterpolationExactAtNodesAndAccurate) {
  auto fn = [](const Point& x) { return std::cos(kTwoPi * x[0]) + 0.5 * std::sin(kTwoPi * x[1]); };
  auto f = GridField::sample(2, 64, fn);
  EXPECT_NEAR(f.interpolate(f.point(70)), f(70), 1e-14);
  Point p{0.3137, 0.777, 0.0};
  EXPECT_NEAR(f.interpolate(p), fn(p), 1e-4);
  Point wrapped{1.3137, -0.223, 0.0};
  EXPECT_NEAR(f.interpolate(wrapped), f.interpolate(p), 1e-12);
}

TEST(GridField, ShapeMismatchThrows) {
  GridField a(1, 8), b(1, 16);
  EXPECT_THROW(a += b, std::invalid_argument);
}

TEST(TimeSeriesField, CubicInTime) {
  std::vector<double> ts;
  std::vector<GridField> fs;
  for (int k = 0; k <= 10; ++k) {
    double t = 0.1 * k;
    ts.push_back(t);
    fs.push_back(GridField::sample(1, 8, [t](const Point& x) { return std::sin(t) * (1 + x[0]); }));
  }
  TimeSeriesField series(ts, fs);
  auto v = series.at(0.43);
  auto dv = series.derivative(0.43);
  for (std::size_t i = 0; i < v.nodes(); ++i) {
    double x = v.point(i)[0];
    EXPECT_NEAR(v(i), std::sin(0.43) * (1 + x), 1e-4);
    EXPECT_NEAR(dv(i), std::cos(0.43) * (1 + x), 1e-3);
  }
  EXPECT_NEAR(series.at(0.5)(3), fs[5](3), 1e-14);
}
