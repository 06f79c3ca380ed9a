#include <gtest/gtest.h>

#include <cmath>

#include "kmplab/cost_functionals.hpp"
#include "kmplab/rng.hpp"

using namespace kmplab;

namespace {

// u = 2 + cos(2 pi (x0 - X(t))), X(t) = t + t^2/2, so the wave speed is c(t) = 1 + t.
// In one dimension the optimal flux is u^2 H' = u'/2 + c (u - 3/2), giving the rate
// (1/2)(A/4 + c^2 B) with A = int u'^2/u^2 = 4 pi^2 (2/sqrt3 - 1), B = int (u - 3/2)^2/u^2 = 1 - sqrt3/2.
SmoothPath travelling_wave(int d, double T) {
  SmoothPath p;
  p.d = d;
  p.T = T;
  p.m = 1.0;
  p.M = 3.0;
  p.u = [](double t, const Point& x) { return 2.0 + std::cos(kTwoPi * (x[0] - t - 0.5 * t * t)); };
  p.dudt = [](double t, const Point& x) { return (1.0 + t) * kTwoPi * std::sin(kTwoPi * (x[0] - t - 0.5 * t * t)); };
  return p;
}

double travelling_wave_cost(double T) {
  const double A = 4 * kPi * kPi * (2 / std::sqrt(3.0) - 1);
  const double B = 1 - std::sqrt(3.0) / 2;
  // int_0^T (1+t)^2 dt
  const double c2 = (std::pow(1 + T, 3) - 1) / 3;
  return 0.5 * (0.25 * A * T + B * c2);
}

}  // namespace

TEST(StaticCost, ReferenceAndDoubledDensity) {
  for (double rho : {0.5, 1.0, 3.0}) {
    EXPECT_NEAR(static_cost(GridField(1, 16, 1, rho), rho), 0.0, 1e-14);
    EXPECT_NEAR(static_cost(GridField(2, 8, 1, 2 * rho), rho), 1.0 - std::log(2.0), 1e-14);
  }
}

TEST(StaticCost, AtomsOnlyEnterThePairing) {
  MeasureState m;
  m.d = 1;
  m.density = GridField(1, 32, 1, 2.0);
  m.atoms = {{{0.3, 0, 0}, 0.7}};
  EXPECT_NEAR(static_cost(m, 2.0), 0.7 / 2.0, 1e-14);
}

TEST(StaticCost, InfiniteWhenDensityVanishes) {
  GridField u(1, 16, 1, 1.0);
  u(4) = 0.0;
  EXPECT_TRUE(std::isinf(static_cost(u, 1.0)));
  MeasureState only_atoms;
  only_atoms.atoms = {{{0.5, 0, 0}, 1.0}};
  EXPECT_TRUE(std::isinf(static_cost(only_atoms, 1.0)));
  EXPECT_THROW(static_cost(GridField(1, 4, 1, 1.0), 0.0), std::invalid_argument);
}

TEST(StaticCost, NonnegativeAndMatchesPointwiseForm) {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    double rho = 0.2 + 3.0 * rng.uniform();
    GridField u(2, 12);
    for (double& v : u.data()) v = rng.exponential(rho) + 1e-3;
    double s = static_cost(u, rho);
    // x - log x - 1 >= 0 pointwise in x = u/rho
    double pointwise = 0.0;
    for (double v : u.data()) {
      double x = v / rho;
      double term = x - std::log(x) - 1.0;
      ASSERT_GE(term, 0.0);
      pointwise += term;
    }
    pointwise /= static_cast<double>(u.nodes());
    EXPECT_GE(s, 0.0);
    EXPECT_NEAR(s, pointwise, 1e-12 * (1 + pointwise));
  }
}

TEST(DynamicCost, HeatFlowIsFree) {
  SmoothPath p;
  p.d = 1;
  p.T = 0.1;
  p.u = [](double t, const Point& x) { return 1 + 0.5 * std::exp(-2 * kPi * kPi * t) * std::cos(kTwoPi * x[0]); };
  p.dudt = [](double t, const Point& x) { return -kPi * kPi * std::exp(-2 * kPi * kPi * t) * std::cos(kTwoPi * x[0]); };
  EXPECT_LT(dynamic_cost(p).value, 1e-20);
  CostOptions opt;
  opt.exact_1d = false;
  EXPECT_LT(dynamic_cost(p, opt).value, 1e-16);
}

TEST(DynamicCost, TravellingWaveClosedForm) {
  const double T = 1.0;
  auto p = travelling_wave(1, T);
  CostOptions opt;
  opt.n = 128;
  auto J = dynamic_cost(p, opt);
  EXPECT_NEAR(J.value, travelling_wave_cost(T), 1e-5 * travelling_wave_cost(T));

  // the weighted elliptic solve in two dimensions sees the same problem
  auto p2 = travelling_wave(2, 0.25);
  CostOptions o2;
  o2.n = 32;
  o2.nodes = 8;
  auto J2 = dynamic_cost(p2, o2);
  EXPECT_NEAR(J2.value, travelling_wave_cost(0.25), 1e-5 * travelling_wave_cost(0.25));
}

TEST(DynamicCost, StableUnderTimeRefinement) {
  auto p = travelling_wave(1, 1.0);
  p.breakpoints = {0.37};
  CostOptions coarse, fine;
  coarse.n = fine.n = 64;
  coarse.nodes = 16;
  fine.nodes = 64;
  double a = dynamic_cost(p, coarse).value, b = dynamic_cost(p, fine).value;
  EXPECT_LT(std::abs(a - b), 1e-5 * b);
}

TEST(DynamicCost, SingularTimesUseSquareRootSubstitution) {
  // rate ~ |t - 1/2|^{-1/2}: u = 2 + cos(2 pi (x - X(t))) with X' = |t - 1/2|^{-1/4}
  SmoothPath p;
  p.d = 1;
  p.T = 1.0;
  auto X = [](double t) {
    double s = t - 0.5;
    return (s < 0 ? -1.0 : 1.0) * std::pow(std::abs(s), 0.75) / 0.75;
  };
  p.u = [X](double t, const Point& x) { return 2.0 + std::cos(kTwoPi * (x[0] - X(t))); };
  p.dudt = [X](double t, const Point& x) {
    return std::pow(std::abs(t - 0.5), -0.25) * kTwoPi * std::sin(kTwoPi * (x[0] - X(t)));
  };
  p.singular_times = {0.5};
  const double A = 4 * kPi * kPi * (2 / std::sqrt(3.0) - 1);
  const double B = 1 - std::sqrt(3.0) / 2;
  // int_0^1 |t - 1/2|^{-1/2} dt = 2 sqrt2
  double expect = 0.5 * (0.25 * A + B * 2 * std::sqrt(2.0));
  CostOptions opt;
  opt.n = 64;
  EXPECT_NEAR(dynamic_cost(p, opt).value, expect, 1e-6 * expect);
}

TEST(CostReport, OptimalBelowCompetitor) {
  auto p = travelling_wave(1, 0.5);
  // a valid but suboptimal control: flux u^2 H' = u'/2 + c (u - 2)
  VectorFieldPath g = [&](double t, int n) {
    GridField v(1, n, 1);
    for (std::size_t i = 0; i < v.nodes(); ++i) {
      double th = kTwoPi * (v.point(i)[0] - t - 0.5 * t * t);
      double u = 2 + std::cos(th), du = -kTwoPi * std::sin(th);
      v(i) = (0.5 * du + (1 + t) * (u - 2)) / u;
    }
    return v;
  };
  CostOptions opt;
  opt.n = 64;
  auto r = cost_report(p, 2.0, g, opt);
  EXPECT_TRUE(r.consistent());
  EXPECT_LT(r.J_optimal, r.J_competitor);
  EXPECT_NEAR(r.S0, r.ST, 1e-12);
}

TEST(EntropyDissipation, ConstantAndFrozenProfile) {
  SmoothPath c;
  c.d = 2;
  c.T = 1.0;
  c.u = [](double, const Point&) { return 1.7; };
  c.dudt = [](double, const Point&) { return 0.0; };
  CostOptions o;
  o.n = 16;
  o.nodes = 4;
  EXPECT_EQ(entropy_dissipation(c, o).value, 0.0);

  SmoothPath f;
  f.d = 1;
  f.T = 0.3;
  f.u = [](double, const Point& x) { return 1 + 0.5 * std::cos(kTwoPi * x[0]); };
  f.dudt = [](double, const Point&) { return 0.0; };
  // midpoint reference with 10^6 nodes
  const int M = 1000000;
  double ref = 0.0;
  for (int i = 0; i < M; ++i) {
    double x = (i + 0.5) / M;
    double r = -kPi * std::sin(kTwoPi * x) / (1 + 0.5 * std::cos(kTwoPi * x));
    ref += r * r;
  }
  ref = 0.5 * 0.3 * ref / M;
  o.n = 128;
  o.nodes = 8;
  EXPECT_NEAR(entropy_dissipation(f, o).value, ref, 1e-10 * ref);

  f.u = [](double, const Point& x) { return std::cos(kTwoPi * x[0]) > 0.99 ? 0.0 : 1.0; };
  EXPECT_TRUE(std::isinf(entropy_dissipation(f, o).value));
}

TEST(EntropyBalance, ExactIdentityAlongSkeletonSolutions) {
  auto u0 = GridField::sample(1, 64, [](const Point& x) { return 1 + 0.6 * std::cos(kTwoPi * x[0]); });
  VectorFieldPath g = [](double t, int n) {
    GridField v(1, n, 1);
    for (std::size_t i = 0; i < v.nodes(); ++i) v(i) = 0.8 * std::sin(kTwoPi * v.point(i)[0]) + 0.3 * t;
    return v;
  };
  SplittingOptions o;
  for (int k = 0; k <= 400; ++k) o.output_times.push_back(0.1 * k / 400);
  o.dt_per_dx = 0.05;
  auto sol = skeleton_solve(u0, g, 0.1, o);
  auto b = entropy_balance(sol.series, g);
  EXPECT_LT(b.identity_gap, 1e-5);
  // the identity implies S_T + (1/4)||grad log u||^2 <= S_0 + ||g||^2
  EXPECT_LE(b.ST + 0.5 * b.dissipation, b.S0 + 2.0 * b.control + 1e-5);
}

TEST(EntropyBalance, DisplayedFormOnHeatAndFlatteningPaths) {
  auto u0 = GridField::sample(2, 32, [](const Point& x) {
    return 1 + 0.5 * std::cos(kTwoPi * x[0]) * std::cos(kTwoPi * x[1]);
  });
  SplittingOptions o;
  for (int k = 0; k <= 100; ++k) o.output_times.push_back(0.05 * k / 100);
  VectorFieldPath zero = [](double, int n) { return GridField(2, n, 2); };
  auto heat = skeleton_solve(u0, zero, 0.05, o);
  auto bh = entropy_balance(heat.series, zero);
  EXPECT_LE(bh.lhs(), bh.rhs() + 1e-3);
  EXPECT_LT(bh.identity_gap, 1e-4);

  // g = -(1/2) grad log u doubles the diffusion
  SplittingResult fl;
  {
    FluxFunction flux = [](double, const GridField& u) {
      GridField f = gradient(u);
      f *= -0.5;
      return f;
    };
    SpeedFunction speed = [](double, const GridField& u) {
      return 0.5 * gradient(u).max_abs() / u.min();
    };
    fl = splitting_solve(u0, flux, speed, 0.05, o);
  }
  VectorFieldPath half_score = [&](double t, int) {
    GridField u = fl.series.at(t);
    GridField g = gradient(u);
    for (std::size_t i = 0; i < g.nodes(); ++i)
      for (int a = 0; a < 2; ++a) g(i, a) = -0.5 * g(i, a) / u(i);
    return g;
  };
  auto bf = entropy_balance(fl.series, half_score);
  EXPECT_LT(bf.identity_gap, 1e-3);
  EXPECT_LE(bf.lhs(), bf.rhs() + 1e-3);
}

TEST(DissipationIntegral, MonotoneInEpsilon) {
  for (int d = 1; d <= 3; ++d) {
    double prev = INFINITY;
    for (double eps : {1.0, 0.1, 0.01}) {
      double v = dissipation_integral(eps, 0.125, default_theta(d), d).value;
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, prev);
      prev = v;
    }
  }
}

TEST(DissipationIntegral, BoundHoldsOnPlanarGrid) {
  for (int a = 0; a <= 3; ++a)
    for (int b = 2; b <= 6; ++b) {
      double eps = std::pow(10.0, -a), sigma = std::ldexp(1.0, -b);
      auto r = dissipation_integral(eps, sigma, 0.5, 2);
      EXPECT_LE(r.value, r.bound) << eps << " " << sigma;
    }
}

TEST(DissipationIntegral, MatchesBruteForceLine) {
  // eps = 1, sigma = 1/4, d = 1 by a 10^6-node midpoint rule in x
  const int M = 1000000;
  const double sigma = 0.25, R = 0.5 * sigma;
  double Z = 0.0;
  for (int i = 0; i < M; ++i) {
    double y = -0.5 + (i + 0.5) / M;
    Z += std::exp(-1.0 / (0.25 - y * y)) / M;
  }
  double ref = 0.0;
  for (int i = 0; i < M; ++i) {
    double x = -R + 2 * R * (i + 0.5) / M;
    double y = x / sigma;
    double q = 0.25 - y * y;
    double rs = std::exp(-1.0 / q) / Z / sigma;
    double dl = -2.0 * y / (q * q) / sigma;
    ref += rs / (1 + rs) * dl * dl * 2 * R / M;
  }
  EXPECT_NEAR(dissipation_integral(1.0, sigma, 0.5, 1).value, ref, 1e-6 * ref);
}

TEST(DissipationIntegral, SigmaExponentAndErrors) {
  std::vector<double> sig;
  for (int b = 2; b <= 6; ++b) sig.push_back(std::ldexp(1.0, -b));
  for (int d = 1; d <= 3; ++d) {
    double th = default_theta(d);
    EXPECT_NEAR(sigma_exponent(1.0, sig, th, d), d * th - 2, 0.1) << d;
  }
  EXPECT_THROW(dissipation_integral(1.0, 0.5, 0.5, 1), std::invalid_argument);
  EXPECT_THROW(dissipation_integral(0.0, 0.1, 0.5, 1), std::invalid_argument);
  EXPECT_THROW(dissipation_integral(1.0, 0.1, 1.0, 1), std::invalid_argument);
}
