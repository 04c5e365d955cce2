#pragma once

// Random boundary data and the stochastic expansions built on the greedy
// engine. A signal is given by a bivariate function with a density, by a
// mean and covariance on the grid, or by sample paths. SPOAFD2 selects one
// orthonormal system by maximizing E|<f, E^q>|^2; SPOAFD1 expands the mean.

#include <Eigen/Eigenvalues>
#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "spoafd/discretize.hpp"
#include "spoafd/errors.hpp"
#include "spoafd/poafd.hpp"

namespace spoafd {

/// f(point, s) with s distributed according to the quadrature's density.
struct BivariateDensity {
  std::function<double(double, double)> f;
  DensityQuadrature quad;
};

/// Mean and covariance C(t_i, t_j) sampled on the grid.
struct CovarianceProcess {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Rows are realizations on the grid; the seed that produced them, if any.
struct SamplePaths {
  Eigen::MatrixXd paths;
  std::uint64_t seed = 0;
};

using StochasticSignal = std::variant<BivariateDensity, CovarianceProcess, SamplePaths>;

inline const char* signal_mode(const StochasticSignal& s) {
  switch (s.index()) {
    case 0: return "density";
    case 1: return "covariance";
    default: return "paths";
  }
}

/// f(., s) on the grid.
inline Eigen::VectorXd density_slice(const BivariateDensity& d, const BoundaryGrid& grid, double s) {
  return sample_on_grid(grid, [&](double t) { return d.f(t, s); });
}

/// Columns B with C = B B^T from the symmetric eigendecomposition;
/// eigenvalues below 1e-13 of the largest count as zero and are dropped.
inline Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols()) throw dimension_mismatch_error("covariance must be square");
  const double scale = cov.cwiseAbs().maxCoeff();
  if (scale == 0.0) return Eigen::MatrixXd(cov.rows(), 0);
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw not_psd_error("covariance matrix is not symmetric");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw not_psd_error("eigendecomposition failed");
  const Eigen::VectorXd& lam = es.eigenvalues();  // ascending
  const double lmax = std::max(std::abs(lam[0]), std::abs(lam[lam.size() - 1]));
  if (lam[0] < -1e-10 * lmax) throw not_psd_error("covariance has a negative eigenvalue " + std::to_string(lam[0]));
  Eigen::Index first = 0;
  while (first < lam.size() && lam[first] <= 1e-13 * lmax) ++first;
  const Eigen::Index keep = lam.size() - first;
  // Largest eigenvalue first.
  Eigen::MatrixXd b(cov.rows(), keep);
  for (Eigen::Index c = 0; c < keep; ++c) b.col(c) = es.eigenvectors().col(lam.size() - 1 - c) * std::sqrt(lam[lam.size() - 1 - c]);
  return b;
}

/// Weighted slices whose weighted second moments reproduce E<f, g>^2.
inline WeightedSlices discretize_signal(const StochasticSignal& signal, const BoundaryGrid& grid) {
  if (const auto* d = std::get_if<BivariateDensity>(&signal)) {
    const auto q = static_cast<Eigen::Index>(d->quad.size());
    WeightedSlices s{Eigen::MatrixXd(grid.size(), q), Eigen::VectorXd(q)};
    for (Eigen::Index i = 0; i < q; ++i) {
      s.values.col(i) = density_slice(*d, grid, d->quad.nodes[i]);
      s.weights[i] = d->quad.mass(static_cast<std::size_t>(i));
    }
    return s;
  }
  if (const auto* c = std::get_if<CovarianceProcess>(&signal)) {
    check_conforms(grid, c->mean.size(), "covariance mean");
    check_conforms(grid, c->cov.rows(), "covariance matrix");
    const Eigen::MatrixXd b = covariance_factor(c->cov);
    WeightedSlices s{Eigen::MatrixXd(grid.size(), b.cols() + 1), Eigen::VectorXd::Ones(b.cols() + 1)};
    s.values.col(0) = c->mean;
    s.values.rightCols(b.cols()) = b;
    return s;
  }
  const auto& p = std::get<SamplePaths>(signal);
  if (p.paths.rows() < 2) throw invalid_parameter("sample-path signals need at least two paths");
  check_conforms(grid, p.paths.cols(), "sample paths");
  return {p.paths.transpose(), Eigen::VectorXd::Constant(p.paths.rows(), 1.0 / static_cast<double>(p.paths.rows()))};
}

/// E f(t) on the grid.
inline Eigen::VectorXd signal_mean(const StochasticSignal& signal, const BoundaryGrid& grid) {
  if (const auto* d = std::get_if<BivariateDensity>(&signal)) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(grid.size());
    for (std::size_t i = 0; i < d->quad.size(); ++i) m += d->quad.mass(i) * density_slice(*d, grid, d->quad.nodes[i]);
    return m;
  }
  if (const auto* c = std::get_if<CovarianceProcess>(&signal)) return c->mean;
  const auto& p = std::get<SamplePaths>(signal);
  return p.paths.colwise().mean().transpose();
}

/// E||f||^2 over the grid.
inline double expected_norm_sq(const StochasticSignal& signal, const BoundaryGrid& grid) {
  if (const auto* d = std::get_if<BivariateDensity>(&signal)) {
    double n = 0.0;
    for (std::size_t i = 0; i < d->quad.size(); ++i)
      n += d->quad.mass(i) * grid_norm_sq(density_slice(*d, grid, d->quad.nodes[i]), grid);
    return n;
  }
  if (const auto* c = std::get_if<CovarianceProcess>(&signal))
    return grid_norm_sq(c->mean, grid) + c->cov.diagonal().dot(grid.weights);
  const auto& p = std::get<SamplePaths>(signal);
  double n = 0.0;
  for (Eigen::Index i = 0; i < p.paths.rows(); ++i) n += grid_norm_sq(p.paths.row(i).transpose(), grid);
  return n / static_cast<double>(p.paths.rows());
}

/// Integral over the boundary of Var f(t, .).
inline double integrated_variance(const StochasticSignal& signal, const BoundaryGrid& grid) {
  if (const auto* c = std::get_if<CovarianceProcess>(&signal)) return c->cov.diagonal().dot(grid.weights);
  const Eigen::VectorXd m = signal_mean(signal, grid);
  Eigen::VectorXd second = Eigen::VectorXd::Zero(grid.size());
  if (const auto* d = std::get_if<BivariateDensity>(&signal)) {
    for (std::size_t i = 0; i < d->quad.size(); ++i)
      second += d->quad.mass(i) * density_slice(*d, grid, d->quad.nodes[i]).cwiseAbs2();
  } else {
    const auto& p = std::get<SamplePaths>(signal);
    second = p.paths.cwiseAbs2().colwise().mean().transpose();
  }
  return (second - m.cwiseAbs2()).dot(grid.weights);
}

/// E|<f, E^q>|^2 with E^q the Gram-Schmidt step of q against the system.
inline double expected_objective(const StochasticSignal& signal, const OrthoSystem& system, const KernelParam& q) {
  const BoundaryGrid& grid = system.grid;
  const Eigen::VectorXd e = gs_step(system, q).E;
  if (const auto* d = std::get_if<BivariateDensity>(&signal)) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d->quad.size(); ++i) {
      const double c = grid_inner(density_slice(*d, grid, d->quad.nodes[i]), e, grid);
      acc += d->quad.mass(i) * c * c;
    }
    return acc;
  }
  if (const auto* c = std::get_if<CovarianceProcess>(&signal)) {
    const double m = grid_inner(c->mean, e, grid);
    const Eigen::VectorXd we = grid.weights.cwiseProduct(e);
    return m * m + we.dot(c->cov * we);
  }
  const auto& p = std::get<SamplePaths>(signal);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.paths.rows(); ++i) {
    const double c = grid_inner(p.paths.row(i).transpose(), e, grid);
    acc += c * c;
  }
  return acc / static_cast<double>(p.paths.rows());
}

/// Statistical maximal selection: argmax of E|<f, E^q>|^2 over the candidates.
inline MaximalSelection smsp_select(const StochasticSignal& signal, const OrthoSystem& system,
                                    const CandidateSet& candidates) {
  SelectionEngine engine(candidates, discretize_signal(signal, system.grid), system);
  const auto b = engine.best();
  return {engine.candidate(b.index), b.objective};
}

/// <realization, E_k> for every k.
inline std::vector<double> realize_coeffs(const OrthoSystem& system, const Eigen::VectorXd& realization) {
  check_conforms(system.grid, realization.size(), "realization");
  std::vector<double> f(system.size());
  for (std::size_t k = 0; k < system.size(); ++k) f[k] = grid_inner(realization, system.E[k], system.grid);
  return f;
}

/// (||g||^2 - Sum_{k<=n} F_k^2) / ||g||^2 for n = 1..len(F).
inline std::vector<double> partial_sum_errors(const std::vector<double>& coeffs, double norm_sq) {
  std::vector<double> out;
  double acc = 0.0;
  for (double c : coeffs) {
    acc += c * c;
    out.push_back((norm_sq - acc) / norm_sq);
  }
  return out;
}

/// One orthonormal system shared by every realization.
struct StochasticExpansion {
  OrthoSystem system;
  std::vector<double> expected_energy_trace;
  std::vector<double> relative_error_trace;
  double N_norm_sq = 0.0;
  SelectionAudit audit;
  bool converged = false;
  std::map<std::string, std::vector<double>> realization_cache;

  /// Coefficients F_n of a realization, cached under the caller's id.
  const std::vector<double>& realize(const std::string& id, const Eigen::VectorXd& realization) {
    auto it = realization_cache.find(id);
    if (it == realization_cache.end()) it = realization_cache.emplace(id, realize_coeffs(system, realization)).first;
    return it->second;
  }
};

inline StochasticExpansion spoafd2_decompose(const StochasticSignal& signal, const BoundaryGrid& grid,
                                             const CandidateSet& candidates, const SelectionOptions& opt) {
  GreedyResult r = greedy_decompose(grid, discretize_signal(signal, grid), candidates, opt);
  StochasticExpansion e;
  e.system = std::move(r.system);
  e.expected_energy_trace = std::move(r.energy_trace);
  e.relative_error_trace = std::move(r.relative_error_trace);
  e.N_norm_sq = r.norm_sq;
  e.audit = std::move(r.audit);
  e.converged = r.converged;
  return e;
}

/// Expansion of the mean plus the integrated variance of the data.
struct Spoafd1Result {
  Expansion mean_expansion;
  Eigen::VectorXd mean;
  double var_l1 = 0.0;
};

inline Spoafd1Result spoafd1_decompose(const StochasticSignal& signal, const BoundaryGrid& grid,
                                       const CandidateSet& candidates, const SelectionOptions& opt) {
  Spoafd1Result r;
  r.mean = signal_mean(signal, grid);
  r.mean_expansion = poafd_decompose(r.mean, grid, candidates, opt);
  r.var_l1 = integrated_variance(signal, grid);
  return r;
}

/// Both sides of the mean-expansion error bounds, squared norms.
///   lhs1 = E||f - mean||^2,  rhs1 = integrated variance (separate route).
///   lhs2 = E||f - Sum_k <f, E_k> E_k||^2 over the full mean system,
///   rhs2[n-1] = var - Sum_{j<=n} E<f - mean, E_j>^2.
struct Spoafd1Bounds {
  double lhs1 = 0.0;
  double rhs1 = 0.0;
  double lhs2 = 0.0;
  std::vector<double> rhs2;
};

inline Spoafd1Bounds spoafd1_bounds(const StochasticSignal& signal, const BoundaryGrid& grid, const Spoafd1Result& r,
                                    std::size_t n_max) {
  const WeightedSlices s = discretize_signal(signal, grid);
  const OrthoSystem& sys = r.mean_expansion.system;
  const Eigen::MatrixXd basis = sys.basis();
  const std::size_t n = std::min(n_max, sys.size());
  Spoafd1Bounds b;
  b.rhs1 = r.var_l1;
  std::vector<double> fluct(n, 0.0);
  const bool covariance = std::holds_alternative<CovarianceProcess>(signal);
  for (Eigen::Index i = 0; i < s.values.cols(); ++i) {
    const double w = s.weights[i];
    // Covariance slices beyond the mean are already centred factor columns.
    const Eigen::VectorXd centred =
        covariance ? (i == 0 ? Eigen::VectorXd::Zero(grid.size()) : Eigen::VectorXd(s.values.col(i)))
                   : Eigen::VectorXd(s.values.col(i) - r.mean);
    const Eigen::VectorXd full = covariance && i > 0 ? centred : Eigen::VectorXd(s.values.col(i));
    b.lhs1 += w * grid_norm_sq(centred, grid);
    const Eigen::VectorXd wf = grid.weights.cwiseProduct(full);
    const Eigen::VectorXd resid = full - basis * (basis.transpose() * wf);
    b.lhs2 += w * grid_norm_sq(resid, grid);
    for (std::size_t j = 0; j < n; ++j) {
      const double c = grid_inner(centred, sys.E[j], grid);
      fluct[j] += w * c * c;
    }
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    acc += fluct[j];
    b.rhs2.push_back(r.var_l1 - acc);
  }
  return b;
}

}  // namespace spoafd
