#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "spoafd/discretize.hpp"

using namespace spoafd;
using oracle::pi;

TEST(CircleGrid, NodesAndWeights) {
  const BoundaryGrid g = make_circle_grid(4);
  ASSERT_EQ(g.size(), 4);
  for (int j = 0; j < 4; ++j) {
    EXPECT_DOUBLE_EQ(g.nodes[j], j * pi / 2);
    EXPECT_DOUBLE_EQ(g.weights[j], 0.25);
  }
  EXPECT_EQ(g.family, Family::disk);
  EXPECT_NEAR(make_circle_grid(4096).weights.sum(), 1.0, 1e-14);
  EXPECT_THROW(make_circle_grid(0), invalid_parameter);
}

TEST(CircleGrid, PoissonUnitMass) {
  const BoundaryGrid g = make_circle_grid(4096);
  const Eigen::VectorXd p = kernel_on_grid(KernelParam(DiskParam(0.5, 0.0)), g);
  EXPECT_NEAR(p.dot(g.weights), 1.0, 1e-12);
}

TEST(CircleGrid, TrigonometricExactness) {
  // Trapezoid rule is exact for degree < M / 2.
  const BoundaryGrid g = make_circle_grid(64);
  for (int k = 1; k < 32; ++k) {
    const Eigen::VectorXd c = sample_on_grid(g, [k](double t) { return std::cos(k * t); });
    EXPECT_NEAR(grid_norm_sq(c, g), 0.5, 1e-14) << k;
    EXPECT_NEAR(c.dot(g.weights), 0.0, 1e-14) << k;
  }
}

TEST(LineGrid, NodesAndWeights) {
  const BoundaryGrid g = make_line_grid(1.0, 3);
  EXPECT_EQ(g.family, Family::heat);
  EXPECT_DOUBLE_EQ(g.nodes[0], -1.0);
  EXPECT_DOUBLE_EQ(g.nodes[1], 0.0);
  EXPECT_DOUBLE_EQ(g.nodes[2], 1.0);
  EXPECT_DOUBLE_EQ(g.weights[0], 0.5);
  EXPECT_DOUBLE_EQ(g.weights[1], 1.0);
  EXPECT_DOUBLE_EQ(g.weights[2], 0.5);
  EXPECT_THROW(make_line_grid(0.0, 10), invalid_parameter);
  EXPECT_THROW(make_line_grid(1.0, 1), invalid_parameter);
}

TEST(LineGrid, GaussianMoments) {
  const BoundaryGrid g = make_line_grid(12.0, 4096);
  const Eigen::VectorXd phi = kernel_on_grid(KernelParam(HeatParam(0.25, 0.0)), g);
  EXPECT_NEAR(phi.dot(g.weights), 1.0, 1e-10);
  const Eigen::VectorXd shifted = kernel_on_grid(KernelParam(HeatParam(0.25, 2.0)), g);
  EXPECT_NEAR(grid_inner(g.nodes, shifted, g), 2.0, 1e-8);
}

TEST(GridInner, Examples) {
  const BoundaryGrid g = make_circle_grid(4096);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(g.size());
  EXPECT_NEAR(grid_inner(one, one, g), 1.0, 1e-14);
  const Eigen::VectorXd p = kernel_on_grid(KernelParam(DiskParam(0.5, 0.0)), g);
  EXPECT_NEAR(grid_norm_sq(p, g), 5.0 / 3.0, 1e-10);
  const Eigen::VectorXd s = sample_on_grid(g, [](double t) { return std::sin(t); });
  const Eigen::VectorXd c = sample_on_grid(g, [](double t) { return std::cos(t); });
  EXPECT_NEAR(grid_inner(s, c, g), 0.0, 1e-14);
}

TEST(GridInner, SymmetricBilinearPositive) {
  const BoundaryGrid g = make_line_grid(3.0, 101);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd a(g.size()), b(g.size()), c(g.size());
    for (Eigen::Index j = 0; j < g.size(); ++j) a[j] = n(rng), b[j] = n(rng), c[j] = n(rng);
    EXPECT_DOUBLE_EQ(grid_inner(a, b, g), grid_inner(b, a, g));
    EXPECT_NEAR(grid_inner(2 * a + c, b, g), 2 * grid_inner(a, b, g) + grid_inner(c, b, g), 1e-12);
    EXPECT_GT(grid_norm_sq(a, g), 0.0);
  }
}

TEST(GridInner, DimensionMismatch) {
  const BoundaryGrid g = make_circle_grid(16);
  EXPECT_THROW(grid_inner(Eigen::VectorXd::Ones(15), Eigen::VectorXd::Ones(16), g), dimension_mismatch_error);
  EXPECT_THROW(kernel_on_grid(KernelParam(HeatParam(1.0, 0.0)), g), mixed_family_error);
}

TEST(DensityQuadrature, UniformMean) {
  const DensityQuadrature q = make_density_quadrature(DensitySpec::uniform(0.0, 1.0), 101);
  EXPECT_NEAR(q.total_mass(), 1.0, 1e-14);
  EXPECT_NEAR(q.expectation([](double s) { return s; }), 0.5, 1e-6);
}

TEST(DensityQuadrature, LaplaceExampleMass) {
  const DensityQuadrature q = make_density_quadrature(DensitySpec::laplace_example(), 201);
  EXPECT_EQ(q.size(), 401u);  // shared breakpoint merged
  EXPECT_NEAR(q.total_mass(), 1.0, 1e-8);
  EXPECT_DOUBLE_EQ(q.lower, -pi);
  EXPECT_DOUBLE_EQ(q.upper, pi);
  // Normalizer against an independent fine Simpson rule of alpha.
  const auto spec = DensitySpec::laplace_example();
  const double m = oracle::simpson(spec.weight, -pi, 0.0, 20000) + oracle::simpson(spec.weight, 0.0, pi, 20000);
  EXPECT_NEAR(q.normalizer, m, 1e-9);
  // Symmetric density: E[X] = 0.
  EXPECT_NEAR(q.expectation([](double s) { return s; }), 0.0, 1e-12);
}

TEST(DensityQuadrature, StandardNormalMoments) {
  const DensityQuadrature q = make_density_quadrature(DensitySpec::standard_normal(8.0), 401);
  EXPECT_NEAR(q.total_mass(), 1.0, 1e-8);
  EXPECT_NEAR(q.expectation([](double s) { return s * s; }), 1.0, 1e-8);
  EXPECT_NEAR(q.expectation([](double s) { return s * s * s * s; }), 3.0, 1e-7);
}

TEST(DensityQuadrature, RejectsBadInput) {
  EXPECT_THROW(make_density_quadrature(DensitySpec::uniform(0, 1), 4), invalid_parameter);
  EXPECT_THROW(make_density_quadrature(DensitySpec::uniform(0, 1), 1), invalid_parameter);
  DensitySpec neg{"neg", [](double) { return -1.0; }, {0.0, 1.0}};
  EXPECT_THROW(make_density_quadrature(neg, 11), invalid_parameter);
  DensitySpec back{"back", [](double) { return 1.0; }, {1.0, 0.0}};
  EXPECT_THROW(make_density_quadrature(back, 11), invalid_parameter);
}

TEST(SampleFromDensity, DeterministicAndInSupport) {
  const auto spec = DensitySpec::laplace_example();
  const auto a = sample_from_density(spec, 500, 42);
  const auto b = sample_from_density(spec, 500, 42);
  EXPECT_EQ(a, b);
  for (double x : a) {
    EXPECT_GE(x, -pi);
    EXPECT_LE(x, pi);
  }
  EXPECT_NE(a, sample_from_density(spec, 500, 43));
}

TEST(SampleFromDensity, NormalMomentsMonteCarlo) {
  const auto xs = sample_from_density(DensitySpec::standard_normal(8.0), 100000, 9);
  double m1 = 0, m2 = 0;
  for (double x : xs) m1 += x, m2 += x * x;
  m1 /= xs.size();
  m2 /= xs.size();
  EXPECT_NEAR(m1, 0.0, 0.02);
  EXPECT_NEAR(m2, 1.0, 0.03);
}

TEST(CovarianceSampling, ZeroCovarianceGivesMean) {
  const BoundaryGrid g = make_circle_grid(32);
  auto mean = [](double t) { return std::sin(t); };
  auto zero = [](double, double) { return 0.0; };
  const Eigen::MatrixXd p = sample_paths_from_covariance(mean, zero, g, 5, 1);
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < g.size(); ++j) EXPECT_EQ(p(i, j), std::sin(g.nodes[j]));
}

TEST(CovarianceSampling, BridgeEndpointPinned) {
  const BoundaryGrid g = make_circle_grid(64);
  auto zero = [](double) { return 0.0; };
  const Eigen::MatrixXd p = sample_paths_from_covariance(zero, brownian_bridge_covariance, g, 10, 3);
  for (Eigen::Index i = 0; i < p.rows(); ++i) EXPECT_EQ(p(i, 0), 0.0);
  EXPECT_DOUBLE_EQ(brownian_bridge_covariance(two_pi, two_pi), 0.0);
  EXPECT_DOUBLE_EQ(brownian_bridge_covariance(0.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(brownian_bridge_covariance(pi, pi), pi / 2);
}

TEST(CovarianceSampling, BridgeEmpiricalCovariance) {
  // 1e5 paths on a 16-node grid: variance at pi and the covariance matrix.
  const BoundaryGrid g = make_circle_grid(16);
  auto zero = [](double) { return 0.0; };
  const int n = 100000;
  const Eigen::MatrixXd p = sample_paths_from_covariance(zero, brownian_bridge_covariance, g, n, 11);
  const Eigen::MatrixXd emp = p.transpose() * p / n;
  EXPECT_NEAR(emp(8, 8), pi / 2, 0.03 * pi / 2);
  double cmax = 0.0;
  for (Eigen::Index i = 0; i < 16; ++i)
    for (Eigen::Index j = 0; j < 16; ++j) cmax = std::max(cmax, brownian_bridge_covariance(g.nodes[i], g.nodes[j]));
  for (Eigen::Index i = 0; i < 16; ++i)
    for (Eigen::Index j = 0; j < 16; ++j) {
      const double c = brownian_bridge_covariance(g.nodes[i], g.nodes[j]);
      if (c >= 0.1 * cmax) EXPECT_NEAR(emp(i, j), c, 0.05 * c) << i << ',' << j;
    }
}

TEST(CovarianceSampling, ReproducibleAndSeedSensitive) {
  const BoundaryGrid g = make_circle_grid(32);
  auto zero = [](double) { return 0.0; };
  const Eigen::MatrixXd a = sample_paths_from_covariance(zero, brownian_bridge_covariance, g, 3, 5);
  const Eigen::MatrixXd b = sample_paths_from_covariance(zero, brownian_bridge_covariance, g, 3, 5);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, sample_paths_from_covariance(zero, brownian_bridge_covariance, g, 3, 6));
  // A path depends only on its index, not on how many paths are drawn.
  const Eigen::MatrixXd c = sample_paths_from_covariance(zero, brownian_bridge_covariance, g, 1, 5);
  EXPECT_EQ(Eigen::VectorXd(c.row(0)), Eigen::VectorXd(a.row(0)));
}

TEST(CovarianceSampling, RejectsIndefinite) {
  const BoundaryGrid g = make_circle_grid(16);
  auto zero = [](double) { return 0.0; };
  auto bad = [](double s, double t) { return s == t ? 1.0 : -1.0; };
  EXPECT_THROW(sample_paths_from_covariance(zero, bad, g, 2, 1), not_psd_error);
  auto asym = [](double s, double t) { return s < t ? 1.0 : 0.5; };
  EXPECT_THROW(sample_paths_from_covariance(zero, asym, g, 2, 1), not_psd_error);
  auto one = [](double, double) { return 1.0; };
  EXPECT_THROW(sample_paths_from_covariance(zero, one, g, 0, 1), invalid_parameter);
}
