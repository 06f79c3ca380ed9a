#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <set>

#include "kmplab/kmp_engine.hpp"
#include "kmplab/rng.hpp"
#include "kmplab/torus_lattice.hpp"

using namespace kmplab;

namespace {

std::vector<double> random_field(const Lattice& lat, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> f(lat.site_count());
  for (double& v : f) v = rng.normal();
  return f;
}

// Dense (-Delta_N + 1) for a lattice, built from neighbour lists.
Eigen::MatrixXd dense_operator(const Lattice& lat) {
  const auto n = static_cast<Eigen::Index>(lat.site_count());
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
  double n2 = static_cast<double>(lat.N()) * lat.N();
  for (std::size_t x = 0; x < lat.site_count(); ++x)
    for (int dir = 0; dir < lat.d(); ++dir)
      for (int step : {-1, 1}) {
        auto y = lat.shift(x, dir, step);
        A(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x)) += n2;
        A(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) -= n2;
      }
  return A;
}

}  // namespace

TEST(Lattice, CountsAndNeighbours) {
  for (int d = 1; d <= 3; ++d) {
    Lattice lat(d, 5);
    EXPECT_EQ(lat.site_count(), ipow(5, d));
    EXPECT_EQ(lat.edge_count(), static_cast<std::size_t>(d) * ipow(5, d));
    std::vector<int> degree(lat.site_count(), 0);
    std::set<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t id = 0; id < lat.edge_count(); ++id) {
      auto e = lat.edge(id);
      ++degree[e.x];
      ++degree[e.y];
      auto key = std::minmax(e.x, e.y);
      EXPECT_TRUE(pairs.insert({key.first, key.second}).second);
    }
    for (int deg : degree) EXPECT_EQ(deg, 2 * d);
  }
}

TEST(Lattice, RejectsDoubleEdgeSide) {
  EXPECT_THROW(Lattice(1, 2), std::invalid_argument);
  EXPECT_THROW(Lattice(4, 8), std::invalid_argument);
  EXPECT_EQ(Lattice(2, 1).edge_count(), 0u);
}

TEST(DiscreteLaplacian, ConstantsAreInKernel) {
  Lattice lat(2, 6);
  auto out = discrete_laplacian(std::vector<double>(lat.site_count(), 3.5), lat);
  for (double v : out) EXPECT_EQ(v, 0.0);
}

TEST(DiscreteLaplacian, IndicatorStencil) {
  Lattice lat(1, 4);
  auto out = discrete_laplacian({1.0, 0.0, 0.0, 0.0}, lat);
  EXPECT_DOUBLE_EQ(out[0], -32.0);
  EXPECT_DOUBLE_EQ(out[1], 16.0);
  EXPECT_DOUBLE_EQ(out[3], 16.0);
  EXPECT_DOUBLE_EQ(out[2], 0.0);
}

TEST(DiscreteLaplacian, SumsToZero) {
  for (int d = 1; d <= 3; ++d) {
    Lattice lat(d, 7);
    auto out = discrete_laplacian(random_field(lat, 11 + d), lat);
    double s = 0.0, scale = 0.0;
    for (double v : out) {
      s += v;
      scale += std::abs(v);
    }
    EXPECT_LE(std::abs(s), 1e-12 * scale);
  }
}

TEST(DiscreteLaplacian, SizeMismatchThrows) {
  EXPECT_THROW(discrete_laplacian(std::vector<double>(3), Lattice(1, 4)), std::invalid_argument);
}

TEST(LocalAverage, ConstantAndBruteForce) {
  Lattice lat(1, 8);
  EnergyConfig c(lat, 2.5);
  for (std::size_t x = 0; x < 8; ++x) EXPECT_DOUBLE_EQ(local_average(c, 0.3, x), 2.5);

  std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8};
  EnergyConfig xi(lat, v);
  EXPECT_EQ(box_half_width(lat, 0.2), 1);
  for (int x = 0; x < 8; ++x) {
    double brute = (v[(x + 7) % 8] + v[x] + v[(x + 1) % 8]) / 3.0;
    EXPECT_NEAR(local_average(xi, 0.2, x), brute, 1e-14);
  }
}

TEST(LocalAverage, PreservesSumAndCommutesWithShift) {
  Lattice lat(2, 9);
  auto f = random_field(lat, 5);
  for (double& v : f) v = std::abs(v);
  EnergyConfig xi(lat, f);
  auto avg = local_average_all(xi, 0.25);
  double s0 = 0.0, s1 = 0.0;
  for (std::size_t x = 0; x < lat.site_count(); ++x) {
    s0 += xi[x];
    s1 += avg[x];
    EXPECT_NEAR(avg[x], local_average(xi, 0.25, x), 1e-12);
  }
  EXPECT_NEAR(s0, s1, 1e-10);

  std::vector<double> shifted(lat.site_count());
  for (std::size_t x = 0; x < lat.site_count(); ++x) shifted[lat.shift(x, 1, 2)] = f[x];
  auto avg_shift = local_average_all(EnergyConfig(lat, shifted), 0.25);
  for (std::size_t x = 0; x < lat.site_count(); ++x) EXPECT_NEAR(avg_shift[lat.shift(x, 1, 2)], avg[x], 1e-12);
}

TEST(LocalAverage, BoxLargerThanTorusThrows) {
  Lattice lat(1, 8);
  EXPECT_THROW(local_average(EnergyConfig(lat, 1.0), 0.5, 0), std::invalid_argument);
}

TEST(GreenKernel, SingleSite) {
  GreenKernel G(Lattice(1, 1));
  EXPECT_NEAR(G.at_origin(), 1.0, 1e-15);
}

TEST(GreenKernel, DenseSolveN3) {
  Lattice lat(1, 3);
  GreenKernel G(lat);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(3);
  rhs(0) = 3.0;
  Eigen::VectorXd sol = dense_operator(lat).lu().solve(rhs);
  for (int x = 0; x < 3; ++x) EXPECT_NEAR(G.at(x), sol(x), 1e-10 * std::abs(sol(0)));
}

TEST(GreenKernel, SolvesEquationInEveryDimension) {
  for (int d = 1; d <= 3; ++d) {
    Lattice lat(d, 5);
    GreenKernel G(lat);
    Eigen::VectorXd g(static_cast<Eigen::Index>(lat.site_count()));
    for (std::size_t x = 0; x < lat.site_count(); ++x) g(static_cast<Eigen::Index>(x)) = G.at(x);
    Eigen::VectorXd r = dense_operator(lat) * g;
    double nd = static_cast<double>(lat.site_count());
    for (std::size_t x = 0; x < lat.site_count(); ++x)
      EXPECT_NEAR(r(static_cast<Eigen::Index>(x)), x == 0 ? nd : 0.0, 1e-10 * nd);
  }
}

TEST(GreenKernel, MeanOne) {
  Lattice lat(2, 16);
  GreenKernel G(lat);
  double s = 0.0;
  for (std::size_t x = 0; x < lat.site_count(); ++x) s += G.at(x);
  EXPECT_NEAR(s / lat.site_count(), 1.0, 1e-10);
}

TEST(GreenKernel, PositiveDefinite) {
  Lattice lat(1, 16);
  GreenKernel G(lat);
  for (std::uint64_t k = 0; k < 1000; ++k) EXPECT_GE(G.quadratic_form(random_field(lat, 1000 + k)), -1e-12);
}

TEST(GreenKernel, GammaBoundsAndOriginGrowth) {
  for (int d = 1; d <= 3; ++d) {
    std::vector<double> ratios;
    for (int N : {8, 16, 32}) {
      Lattice lat(d, N);
      GreenKernel G(lat);
      double bound = std::pow(N, d - 2) / (2.0 * d);
      EXPECT_GE(G.gamma(), 0.0);
      EXPECT_LE(G.gamma(), bound * (1 + 1e-12));
      ratios.push_back(G.at_origin() / static_cast<double>(lat.site_count()));
    }
    for (double r : ratios) EXPECT_LT(r, 1.0);
  }
}

TEST(LyapunovF, ZeroConstantAndBruteForce) {
  Lattice lat(1, 4);
  GreenKernel G(lat);
  EXPECT_NEAR(lyapunov_F(EnergyConfig(lat, 0.0), G), 0.0, 1e-15);
  EXPECT_NEAR(lyapunov_F(EnergyConfig(lat, 1.7), G), 1.7 * 1.7, 1e-12);

  std::vector<double> v{0.3, 2.0, 1.1, 0.7};
  double brute = 0.0;
  for (int x = 0; x < 4; ++x)
    for (int y = 0; y < 4; ++y) brute += G.at(static_cast<std::size_t>(((x - y) % 4 + 4) % 4)) * v[x] * v[y];
  brute /= 16.0;
  EXPECT_NEAR(lyapunov_F(EnergyConfig(lat, v), G), brute, 1e-12);
}

TEST(LyapunovF, OrientationIndependent) {
  // Reflecting the configuration leaves F unchanged.
  Lattice lat(2, 6);
  auto f = random_field(lat, 3);
  for (double& v : f) v = std::abs(v);
  std::vector<double> refl(f.size());
  for (std::size_t x = 0; x < f.size(); ++x) {
    auto c = lat.coords(x);
    c[0] = (6 - c[0]) % 6;
    refl[lat.site(c)] = f[x];
  }
  GreenKernel G(lat);
  EXPECT_NEAR(lyapunov_F(EnergyConfig(lat, f), G), lyapunov_F(EnergyConfig(lat, refl), G), 1e-12);
}
