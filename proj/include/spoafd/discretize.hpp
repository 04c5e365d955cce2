#pragma once

// Boundary grids, quadrature over a random variable's law, and seeded
// sampling of covariance-defined processes.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "spoafd/errors.hpp"
#include "spoafd/kernels.hpp"

namespace spoafd {

/// Discretized boundary: the circle with weights summing to one (normalized
/// measure) or the truncated line [-L, L] with trapezoid weights.
struct BoundaryGrid {
  Family family = Family::disk;
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
  double half_width = 0.0;  // line only

  Eigen::Index size() const { return nodes.size(); }
};

/// M equispaced nodes 2 pi j / M with weights 1 / M.
inline BoundaryGrid make_circle_grid(int points) {
  if (points < 1) throw invalid_parameter("circle grid needs at least one node");
  BoundaryGrid g;
  g.family = Family::disk;
  g.nodes.resize(points);
  for (int j = 0; j < points; ++j) g.nodes[j] = two_pi * j / points;
  g.weights = Eigen::VectorXd::Constant(points, 1.0 / points);
  return g;
}

/// N equispaced nodes on [-L, L] with trapezoid weights.
inline BoundaryGrid make_line_grid(double half_width, int points) {
  if (!(half_width > 0.0)) throw invalid_parameter("line grid half-width must be positive");
  if (points < 2) throw invalid_parameter("line grid needs at least two nodes");
  BoundaryGrid g;
  g.family = Family::heat;
  g.half_width = half_width;
  g.nodes = Eigen::VectorXd::LinSpaced(points, -half_width, half_width);
  const double h = 2.0 * half_width / (points - 1);
  g.weights = Eigen::VectorXd::Constant(points, h);
  g.weights[0] = g.weights[points - 1] = h / 2;
  return g;
}

inline void check_conforms(const BoundaryGrid& grid, Eigen::Index n, const char* what) {
  if (n != grid.size())
    throw dimension_mismatch_error(std::string(what) + ": expected " + std::to_string(grid.size()) +
                                   " grid values, got " + std::to_string(n));
}

/// Sum_j w_j f_j g_j.
inline double grid_inner(const Eigen::Ref<const Eigen::VectorXd>& f, const Eigen::Ref<const Eigen::VectorXd>& g,
                         const BoundaryGrid& grid) {
  check_conforms(grid, f.size(), "grid_inner");
  check_conforms(grid, g.size(), "grid_inner");
  return (f.array() * g.array() * grid.weights.array()).sum();
}

inline double grid_norm_sq(const Eigen::Ref<const Eigen::VectorXd>& f, const BoundaryGrid& grid) {
  return grid_inner(f, f, grid);
}

/// Boundary values of K~_q on the grid nodes.
inline Eigen::VectorXd kernel_on_grid(const KernelParam& q, const BoundaryGrid& grid) {
  if (q.family() != grid.family) throw mixed_family_error("kernel family does not match the grid");
  Eigen::VectorXd v(grid.size());
  for (Eigen::Index j = 0; j < grid.size(); ++j) v[j] = kernel_trace(q, grid.nodes[j]);
  return v;
}

/// Samples a function of the boundary coordinate on the grid.
template <class F>
Eigen::VectorXd sample_on_grid(const BoundaryGrid& grid, F&& f) {
  Eigen::VectorXd v(grid.size());
  for (Eigen::Index j = 0; j < grid.size(); ++j) v[j] = f(grid.nodes[j]);
  return v;
}

/// Law of a scalar random variable given by an (unnormalized) density on a
/// union of adjacent intervals. The density must be smooth on each piece.
struct DensitySpec {
  std::string name;
  std::function<double(double)> weight;  // alpha(s) >= 0, normalized internally
  std::vector<double> breakpoints;       // b_0 < b_1 < ... ; pieces [b_i, b_{i+1}]

  double lower() const { return breakpoints.front(); }
  double upper() const { return breakpoints.back(); }

  static DensitySpec uniform(double a, double b) {
    return {"uniform", [](double) { return 1.0; }, {a, b}};
  }

  /// alpha(s) = exp(-1 / ((s - pi)^2 + 1)) on [0, pi] and
  /// exp(-1 / ((s + pi)^2 + 1)) on [-pi, 0).
  static DensitySpec laplace_example() {
    constexpr double pi = std::numbers::pi;
    auto alpha = [](double s) {
      const double c = s >= 0.0 ? s - pi : s + pi;
      return std::exp(-1.0 / (c * c + 1.0));
    };
    return {"laplace_example", alpha, {-pi, 0.0, pi}};
  }

  /// Standard normal truncated to [-w, w].
  static DensitySpec standard_normal(double half_width = 8.0) {
    auto phi = [](double s) { return std::exp(-0.5 * s * s) / std::sqrt(2.0 * std::numbers::pi); };
    return {"standard_normal", phi, {-half_width, half_width}};
  }
};

/// Nodes and weights with Sum_i w_i p(s_i) g(s_i) ~ E[g(X)].
struct DensityQuadrature {
  std::vector<double> nodes;
  std::vector<double> weights;  // composite Simpson weights
  std::vector<double> density;  // p(s_i) = alpha(s_i) / m
  double normalizer = 1.0;      // m = integral of alpha by the same rule
  double lower = 0.0;
  double upper = 0.0;

  std::size_t size() const { return nodes.size(); }

  /// Probability weight w_i p(s_i) of node i.
  double mass(std::size_t i) const { return weights[i] * density[i]; }

  double total_mass() const {
    double m = 0.0;
    for (std::size_t i = 0; i < size(); ++i) m += mass(i);
    return m;
  }

  template <class G>
  double expectation(G&& g) const {
    double e = 0.0;
    for (std::size_t i = 0; i < size(); ++i) e += mass(i) * g(nodes[i]);
    return e;
  }
};

/// Composite Simpson on each piece (nodes_per_piece odd, >= 3); shared
/// breakpoints are merged into one node.
inline DensityQuadrature make_density_quadrature(const DensitySpec& spec, int nodes_per_piece) {
  if (nodes_per_piece < 3 || nodes_per_piece % 2 == 0)
    throw invalid_parameter("Simpson quadrature needs an odd node count >= 3 per piece");
  if (spec.breakpoints.size() < 2) throw invalid_parameter("density needs at least one support interval");
  DensityQuadrature q;
  q.lower = spec.lower();
  q.upper = spec.upper();
  for (std::size_t piece = 0; piece + 1 < spec.breakpoints.size(); ++piece) {
    const double a = spec.breakpoints[piece];
    const double b = spec.breakpoints[piece + 1];
    if (!(b > a)) throw invalid_parameter("density breakpoints must be strictly increasing");
    const double h = (b - a) / (nodes_per_piece - 1);
    for (int j = 0; j < nodes_per_piece; ++j) {
      const double w = (j == 0 || j == nodes_per_piece - 1) ? h / 3 : (j % 2 == 1 ? 4 * h / 3 : 2 * h / 3);
      const double x = (j == nodes_per_piece - 1) ? b : a + j * h;
      if (j == 0 && !q.nodes.empty()) {
        q.weights.back() += w;  // shared breakpoint
        continue;
      }
      q.nodes.push_back(x);
      q.weights.push_back(w);
    }
  }
  q.density.resize(q.nodes.size());
  double m = 0.0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    const double a = spec.weight(q.nodes[i]);
    if (!(a >= 0.0)) throw invalid_parameter("density must be nonnegative on its support");
    q.density[i] = a;
    m += q.weights[i] * a;
  }
  if (!(m > 0.0)) throw invalid_parameter("density has zero total mass");
  for (double& p : q.density) p /= m;
  q.normalizer = m;
  return q;
}

/// SplitMix64 finalizer, used to derive independent per-stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Generator for stream `index` of a run seeded with `seed`.
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
}

/// Draws from the density by rejection against a uniform proposal.
inline std::vector<double> sample_from_density(const DensitySpec& spec, std::size_t count, std::uint64_t seed) {
  double peak = 0.0;
  constexpr int scan = 4096;
  for (int i = 0; i <= scan; ++i)
    peak = std::max(peak, spec.weight(spec.lower() + (spec.upper() - spec.lower()) * i / scan));
  peak *= 1.05;
  auto rng = stream_rng(seed, 0);
  std::uniform_real_distribution<double> pos(spec.lower(), spec.upper());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> out;
  out.reserve(count);
  while (out.size() < count) {
    const double x = pos(rng);
    if (unit(rng) * peak <= spec.weight(x)) out.push_back(x);
  }
  return out;
}

/// Rows are mean + chol(C + eps I) z, eps = 1e-12 max diag(C), with z drawn
/// from the per-path stream of `seed`. Nodes where C vanishes on the
/// diagonal are pinned to the mean.
template <class Mean, class Cov>
Eigen::MatrixXd sample_paths_from_covariance(Mean&& mean, Cov&& cov, const BoundaryGrid& grid, int paths,
                                             std::uint64_t seed) {
  if (paths < 1) throw invalid_parameter("need at least one sample path");
  const Eigen::Index m = grid.size();
  Eigen::MatrixXd c(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) c(i, j) = cov(grid.nodes[i], grid.nodes[j]);
  Eigen::VectorXd mu = sample_on_grid(grid, mean);

  const double scale = c.cwiseAbs().maxCoeff();
  if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1e-300))
    throw not_psd_error("covariance matrix is not symmetric");

  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < m; ++i)
    if (c(i, i) != 0.0) active.push_back(i);

  Eigen::MatrixXd out = mu.transpose().replicate(paths, 1);
  if (active.empty()) return out;

  const Eigen::Index k = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd ca(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) ca(i, j) = c(active[i], active[j]);
  const double jitter = 1e-12 * ca.diagonal().maxCoeff();
  ca.diagonal().array() += jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(ca);
  if (llt.info() != Eigen::Success) throw not_psd_error("Cholesky factorization failed after jitter");
  const Eigen::MatrixXd l = llt.matrixL();

  Eigen::VectorXd z(k);
  for (int p = 0; p < paths; ++p) {
    auto rng = stream_rng(seed, static_cast<std::uint64_t>(p));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < k; ++i) z[i] = normal(rng);
    const Eigen::VectorXd x = l * z;
    for (Eigen::Index i = 0; i < k; ++i) out(p, active[i]) += x[i];
  }
  return out;
}

/// Brownian bridge on [0, 2 pi]: min(s, t) - s t / (2 pi).
inline double brownian_bridge_covariance(double s, double t) { return std::min(s, t) - s * t / two_pi; }

}  // namespace spoafd
