#include <gtest/gtest.h>

#include <cmath>

#include "kmplab/cutoff_moments.hpp"
#include "kmplab/rng.hpp"

using namespace kmplab;

TEST(CutoffMoments, LargeCutoffLimit) {
  for (double rho : {0.5, 1.0, 2.0}) {
    double K = 400.0 * rho;
    EXPECT_NEAR(m1K(rho, K), rho, 1e-12);
    EXPECT_NEAR(thetaK(rho, K) / (rho * rho), 1.0, 1e-12);
    EXPECT_NEAR(gammaK(rho, K) / (rho * rho), 1.0, 1e-12);
    EXPECT_NEAR(rK(rho, K), 1.0, 1e-12);
  }
}

TEST(CutoffMoments, HandValues) {
  EXPECT_NEAR(m1K(1.0, 1.0), 1.0 - std::exp(-1.0), 1e-15);
  EXPECT_NEAR(m11K(1.0, 1.0), 2.0 - 3.0 * std::exp(-1.0), 1e-15);
  EXPECT_NEAR(m2K(1.0, 1.0), 2.0 - 4.0 * std::exp(-1.0), 1e-15);
  EXPECT_EQ(m1K(0.0, 1.0), 0.0);
  EXPECT_EQ(thetaK(0.0, 1.0), 0.0);
  EXPECT_THROW(aK(0.0, 1.0), std::domain_error);
  EXPECT_THROW(rK(0.0, 1.0), std::domain_error);
  EXPECT_DOUBLE_EQ(thetaK_infinity(3.0), 1.0);
}

TEST(CutoffMoments, ThetaClosedFormMatchesCombination) {
  for (double rho = 0.05; rho < 20.0; rho *= 1.37)
    for (double K = 0.05; K < 50.0; K *= 1.51) {
      double direct = rho * rho * (1.0 - (1.0 + 2.0 * K / (3.0 * rho)) * std::exp(-K / rho));
      EXPECT_NEAR(thetaK(rho, K), direct, 1e-12 * std::max(1.0, rho * rho));
      EXPECT_NEAR(thetaK_combination(rho, K), direct, 1e-12 * std::max(1.0, rho * rho));
    }
}

TEST(CutoffMoments, MonteCarloTruncatedMean) {
  // E[(rho X) ^ K] for X ~ Exp(1)
  Rng rng(31);
  const int R = 1000000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < R; ++i) {
    double v = std::min(rng.exponential(1.0), 1.0);
    s += v;
    s2 += v * v;
  }
  double mean = s / R, se = std::sqrt((s2 / R - mean * mean) / R);
  EXPECT_LT(std::abs(mean - m1K(1.0, 1.0)), 4 * se);
}

TEST(CutoffMoments, ThetaPositiveAndAsymptotics) {
  for (double rho : {1e-3, 0.1, 1.0, 10.0}) EXPECT_GT(thetaK(rho, 2.0), 0.0);
  // Theta_K(rho) ~ K rho / 3 for rho >> K
  EXPECT_NEAR(thetaK(1e6, 3.0) / 1e6, 1.0, 1e-5);
}

TEST(CutoffMoments, ThetaPrimeMatchesFiniteDifference) {
  for (double rho : {0.1, 0.7, 3.0, 12.0})
    for (double K : {0.5, 2.0, 9.0}) {
      double h = 1e-5 * rho;
      double fd = (thetaK(rho + h, K) - thetaK(rho - h, K)) / (2 * h);
      EXPECT_NEAR(thetaK_prime(rho, K), fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
}
