#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "kmplab/fields_pde.hpp"
#include "kmplab/rng.hpp"

using namespace kmplab;

namespace {

GridField cos_mode(int n) {
  return GridField::sample(1, n, [](const Point& x) { return std::cos(kTwoPi * x[0]); });
}

// u = 1 + e^{-2 pi^2 t} cos(2 pi x)/2 + b(t) sin(2 pi x), b(t) = a sin(pi t / T)
struct BumpPath {
  double T = 0.05, a = 0.1;
  double b(double t) const { return a * std::sin(kPi * t / T); }
  double db(double t) const { return a * kPi / T * std::cos(kPi * t / T); }
  SmoothPath path() const {
    SmoothPath p;
    p.d = 1;
    p.T = T;
    p.m = 0.5 - a;
    p.M = 1.5 + a;
    auto self = *this;
    p.u = [self](double t, const Point& x) {
      return 1.0 + 0.5 * std::exp(-2 * kPi * kPi * t) * std::cos(kTwoPi * x[0]) + self.b(t) * std::sin(kTwoPi * x[0]);
    };
    p.dudt = [self](double t, const Point& x) {
      return -kPi * kPi * std::exp(-2 * kPi * kPi * t) * std::cos(kTwoPi * x[0]) + self.db(t) * std::sin(kTwoPi * x[0]);
    };
    return p;
  }
};

}  // namespace

TEST(HeatStep, ConstantsModesSemigroup) {
  GridField c(2, 8, 1, 3.0);
  auto pc = heat_step(c, 0.7);
  for (std::size_t i = 0; i < c.nodes(); ++i) EXPECT_NEAR(pc(i), 3.0, 1e-14);

  auto f = cos_mode(32);
  auto pf = heat_step(f, 0.01);
  double decay = std::exp(-2 * kPi * kPi * 0.01);
  for (std::size_t i = 0; i < f.nodes(); ++i) EXPECT_NEAR(pf(i), decay * f(i), 1e-14);

  auto r = GridField::sample(2, 16, [](const Point& x) { return std::exp(std::sin(kTwoPi * x[0]) * std::cos(kTwoPi * x[1])); });
  auto a = heat_step(heat_step(r, 0.003), 0.004);
  auto b = heat_step(r, 0.007);
  for (std::size_t i = 0; i < r.nodes(); ++i) EXPECT_NEAR(a(i), b(i), 1e-12);
  EXPECT_NEAR(b.integral(), r.integral(), 1e-14);
  EXPECT_THROW(heat_step(r, -1.0), std::invalid_argument);
}

TEST(OptimalControl, ConstantAndHeatFlowAreFree) {
  GridField u(2, 16, 1, 1.3), du(2, 16);
  auto sol = optimal_control(u, du);
  EXPECT_EQ(sol.H.max_abs(), 0.0);
  EXPECT_EQ(sol.g.max_abs(), 0.0);

  double t = 0.02;
  auto heat = GridField::sample(1, 64, [t](const Point& x) { return 1 + 0.5 * std::exp(-2 * kPi * kPi * t) * std::cos(kTwoPi * x[0]); });
  auto dheat = GridField::sample(1, 64, [t](const Point& x) { return -kPi * kPi * std::exp(-2 * kPi * kPi * t) * std::cos(kTwoPi * x[0]); });
  auto s2 = optimal_control(heat, dheat);
  EXPECT_LT(s2.g.max_abs(), 1e-9);
  EXPECT_LT(s2.cost_rate, 1e-18);
}

TEST(OptimalControl, ManufacturedSolution1D) {
  const int n = 128;
  auto ustar = GridField::sample(1, n, [](const Point& x) { return 2 + std::cos(kTwoPi * x[0]); });
  auto hstar = GridField::sample(1, n, [](const Point& x) { return std::sin(kTwoPi * x[0]); });
  // dt u = (1/2) lap u - div(u^2 grad H*)
  GridField w = ustar;
  for (double& v : w.data()) v *= v;
  GridField dudt = 0.5 * laplacian(ustar) - divergence(scale_by(w, gradient(hstar)));
  auto sol = optimal_control(ustar, dudt);
  auto gH = gradient(sol.H);
  for (std::size_t i = 0; i < gH.nodes(); ++i) EXPECT_NEAR(gH(i), kTwoPi * std::cos(kTwoPi * ustar.point(i)[0]), 1e-6);
  EXPECT_LE(sol.residual, 1e-8);
  // (1/2) int (2+cos)^2 (2 pi cos)^2 = 2 pi^2 * int (4 cos^2 + 4 cos^3 + cos^4) = 2 pi^2 (2 + 3/8)
  EXPECT_NEAR(sol.cost_rate, 2 * kPi * kPi * (2.0 + 3.0 / 8.0), 1e-8);

  auto exact = optimal_control_1d(ustar, dudt);
  EXPECT_NEAR(exact.cost_rate, sol.cost_rate, 1e-8);
  for (std::size_t i = 0; i < gH.nodes(); ++i) EXPECT_NEAR(exact.dH(i), gH(i), 1e-7);
}

TEST(OptimalControl, FirstVariationOrthogonality) {
  const int n = 48;
  auto u = GridField::sample(2, n, [](const Point& x) {
    return 1.5 + 0.4 * std::cos(kTwoPi * x[0]) * std::sin(kTwoPi * x[1]) + 0.2 * std::sin(2 * kTwoPi * x[0]);
  });
  auto dudt = GridField::sample(2, n, [](const Point& x) {
    return std::sin(kTwoPi * (x[0] + x[1])) + 0.3 * std::cos(kTwoPi * x[1]);
  });
  auto sol = optimal_control(u, dudt);
  Rng rng(4);
  double gnorm = std::sqrt(sol.g.dot(sol.g));
  for (int trial = 0; trial < 16; ++trial) {
    // u h = perp grad psi for a random trigonometric psi
    double c[4];
    for (double& v : c) v = rng.normal();
    int k1 = 1 + static_cast<int>(rng.below(3)), k2 = 1 + static_cast<int>(rng.below(3));
    auto psi = GridField::sample(2, n, [&](const Point& x) {
      return c[0] * std::cos(kTwoPi * k1 * x[0]) * std::sin(kTwoPi * k2 * x[1]) + c[1] * std::sin(kTwoPi * (k1 * x[0] + x[1])) +
             c[2] * std::cos(kTwoPi * k2 * x[1]) + c[3] * std::sin(kTwoPi * k1 * x[0]);
    });
    auto gp = gradient(psi);
    GridField h(2, n, 2);
    for (std::size_t i = 0; i < h.nodes(); ++i) {
      h(i, 0) = -gp(i, 1) / u(i);
      h(i, 1) = gp(i, 0) / u(i);
    }
    EXPECT_LT(divergence(scale_by(u, h)).max_abs(), 1e-9);
    EXPECT_LE(std::abs(sol.g.dot(h)), 1e-7 * gnorm * std::sqrt(h.dot(h)));
  }
}

TEST(OptimalControl, RejectsNonPositiveDensity) {
  GridField u(1, 8, 1, 1.0), du(1, 8);
  u(3) = 0.0;
  EXPECT_THROW(optimal_control(u, du), NumericFailure);
}

TEST(SkeletonSolve, ZeroControlIsHeatFlow) {
  auto u0 = GridField::sample(1, 64, [](const Point& x) { return 1 + 0.5 * std::cos(kTwoPi * x[0]) + 0.2 * std::sin(3 * kTwoPi * x[0]); });
  VectorFieldPath zero = [](double, int n) { return GridField(1, n, 1); };
  auto res = skeleton_solve(u0, zero, 0.05);
  auto expect = heat_step(u0, 0.05);
  auto got = res.series.slices().back();
  for (std::size_t i = 0; i < u0.nodes(); ++i) EXPECT_NEAR(got(i), expect(i), 1e-10);
}

TEST(SkeletonSolve, ConservesMassAndConverges) {
  auto u0 = GridField::sample(2, 32, [](const Point& x) { return 1 + 0.5 * std::cos(kTwoPi * x[0]) * std::cos(kTwoPi * x[1]); });
  VectorFieldPath g = [](double t, int n) {
    GridField v(2, n, 2);
    for (std::size_t i = 0; i < v.nodes(); ++i) {
      Point x = v.point(i);
      v(i, 0) = std::sin(kTwoPi * x[1]) * (1 + t);
      v(i, 1) = 0.5 * std::cos(kTwoPi * x[0]);
    }
    return v;
  };
  SplittingOptions opt;
  opt.output_times = {0.0, 0.05, 0.1};
  auto res = skeleton_solve(u0, g, 0.1, opt);
  EXPECT_LE(res.max_mass_drift, 1e-10 * 0.1);
  EXPECT_EQ(res.series.size(), 3u);

  // second order in time: error ratio about 4 when the step halves
  auto run = [&](double dpd) {
    SplittingOptions o;
    o.dt_per_dx = dpd;
    o.cfl = 1e9;
    return skeleton_solve(u0, g, 0.1, o).series.slices().back();
  };
  auto ref = run(0.005);
  double e1 = (run(0.4) - ref).max_abs();
  double e2 = (run(0.2) - ref).max_abs();
  EXPECT_GT(e1 / e2, 3.5);
}

TEST(SkeletonSolve, ClippingAndBlowUp) {
  GridField u0(1, 16, 1, 1.0);
  u0(0) = -1.0;
  VectorFieldPath zero = [](double, int n) { return GridField(1, n, 1); };
  EXPECT_THROW(skeleton_solve(u0, zero, 0.1), std::invalid_argument);

  GridField spike(1, 32, 1, 1e-3);
  spike(0) = 10.0;
  VectorFieldPath strong = [](double, int n) {
    return GridField::sample(1, n, [](const Point& x) { return 200.0 * std::sin(kTwoPi * x[0]); });
  };
  SplittingOptions o;
  o.cfl = 50.0;
  EXPECT_THROW(skeleton_solve(spike, strong, 0.01, o), NumericFailure);
}

TEST(ThetaOnMeasure, ZeroAtomAndLipschitz) {
  MeasureState zero;
  zero.density = GridField(1, 16);
  auto tz = theta_on_measure(zero, 2.0);
  EXPECT_EQ(tz.total_mass(), 0.0);

  MeasureState atom;
  atom.atoms = {{{0.25, 0, 0}, 1.5}};
  auto ta = theta_on_measure(atom, 3.0);
  ASSERT_EQ(ta.atoms.size(), 1u);
  EXPECT_DOUBLE_EQ(ta.atoms[0].w, 1.5);

  const double K = 2.0;
  double CK = 0.0;
  for (int i = 1; i <= 200000; ++i) CK = std::max(CK, std::abs(thetaK_prime(i * 1e-4, K)));
  CK = std::max(CK, thetaK_infinity(K));
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    MeasureState a, b;
    a.density = GridField(1, 32);
    b.density = GridField(1, 32);
    for (std::size_t i = 0; i < 32; ++i) {
      a.density(i) = 5 * rng.uniform();
      b.density(i) = 5 * rng.uniform();
    }
    a.atoms = {{{0.1, 0, 0}, rng.uniform()}};
    b.atoms = {{{0.1, 0, 0}, rng.uniform()}, {{0.6, 0, 0}, rng.uniform()}};
    EXPECT_LE(tv_distance(theta_on_measure(a, K), theta_on_measure(b, K)), CK * tv_distance(a, b) * (1 + 1e-12));
  }
}

TEST(TfpSolve, ZeroPotentialIsHeatFlow) {
  auto u0 = GridField::sample(1, 64, [](const Point& x) { return 1 + 0.5 * std::cos(kTwoPi * x[0]); });
  TimeSeriesField H({0.0, 0.1}, {GridField(1, 64), GridField(1, 64)});
  TimeSeriesField chi({0.0, 0.1}, {GridField(1, 64, 1, 1.0), GridField(1, 64, 1, 1.0)});
  auto res = tfp_solve(u0, H, chi, 2.0, 0.1);
  auto expect = heat_step(u0, 0.1);
  EXPECT_LT((res.series.slices().back() - expect).max_abs(), 1e-10);
}

TEST(TfpSolve, FixedPointOfTheTiltedFlow) {
  BumpPath bp;
  auto path = bp.path();
  const double K = 4.0;
  const int slices = 129;
  auto solve = [&](int n, bool drift_first, double dpd) {
    std::vector<double> ts;
    std::vector<GridField> hs, cs;
    for (int j = 0; j < slices; ++j) {
      double t = bp.T * j / (slices - 1);
      ts.push_back(t);
      auto u = path.sample_u(t, n);
      hs.push_back(optimal_control(u, path.sample_dudt(t, n)).H);
      GridField c = u;
      for (double& v : c.data()) v = aK(v, K);
      cs.push_back(c);
    }
    SplittingOptions o;
    o.dt_per_dx = dpd;
    o.drift_first = drift_first;
    auto res = tfp_solve(path.sample_u(0.0, n), TimeSeriesField(ts, hs), TimeSeriesField(ts, cs), K, bp.T, o);
    return (res.series.slices().back() - path.sample_u(bp.T, n)).max_abs();
  };
  double g1 = solve(16, false, 0.2), g2 = solve(32, false, 0.2);
  EXPECT_GT(g1 / g2, 3.5);
}

TEST(TfpSolve, StepperOrderingsAgree) {
  BumpPath bp;
  auto path = bp.path();
  const double K = 4.0;
  const int n = 32;
  std::vector<double> ts;
  std::vector<GridField> hs, cs;
  for (int j = 0; j <= 64; ++j) {
    double t = bp.T * j / 64;
    ts.push_back(t);
    auto u = path.sample_u(t, n);
    hs.push_back(optimal_control(u, path.sample_dudt(t, n)).H);
    GridField c = u;
    for (double& v : c.data()) v = aK(v, K);
    cs.push_back(c);
  }
  SplittingOptions a, b;
  a.dt_per_dx = b.dt_per_dx = 0.0005;
  b.drift_first = true;
  auto ra = tfp_solve(path.sample_u(0.0, n), TimeSeriesField(ts, hs), TimeSeriesField(ts, cs), K, bp.T, a);
  auto rb = tfp_solve(path.sample_u(0.0, n), TimeSeriesField(ts, hs), TimeSeriesField(ts, cs), K, bp.T, b);
  EXPECT_LT((ra.series.slices().back() - rb.series.slices().back()).max_abs(), 1e-8);
}

TEST(FieldOutput, CsvAndBinary) {
  auto f = GridField::sample(2, 4, [](const Point& x) { return x[0] + 10 * x[1]; });
  std::ostringstream os;
  write_field_csv(os, f, 0.5);
  std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find("\r\n")), "t,x0,x1,v0");
  EXPECT_NE(s.find("0.5,0.25,0.5,5.25\r\n"), std::string::npos);

  TimeSeriesField series({0.0, 1.0}, {f, 2.0 * f});
  std::stringstream bin;
  write_field_series(bin, series, 9);
  auto back = read_field_series(bin);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.slices()[1].data(), series.slices()[1].data());
}
