#pragma once

// Pre-orthogonal greedy expansion over a kernel dictionary.
//
// The engine works on "weighted slices": a set of grid functions f_i with
// weights w_i, maximizing Sum_i w_i <f_i, E^q>^2 over candidates q. A single
// deterministic signal is one slice of weight 1; the stochastic layer feeds
// density nodes, covariance factors or sample paths through the same code.
// Per candidate it keeps R(i, q) = <f_i, K_q> - Sum_k <f_i, E_k><K_q, E_k> and
// ||K_q||^2 - Sum_k <K_q, E_k>^2, updated by a rank-one step per selection.

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "spoafd/candidates.hpp"
#include "spoafd/discretize.hpp"
#include "spoafd/errors.hpp"
#include "spoafd/kernels.hpp"

namespace spoafd {

/// Relative Gram-Schmidt degeneracy threshold: ||residual|| <= tau ||K||.
inline constexpr double gs_tolerance = 1e-8;

/// Consecutively orthonormalized (multiple) kernels on a boundary grid.
struct OrthoSystem {
  BoundaryGrid grid;
  RepeatRule rule;
  std::vector<KernelParam> params;
  std::vector<Eigen::VectorXd> E;
  std::vector<Eigen::VectorXd> raw_K;
  /// a_ij = <E_j, K~_{q_i}> for j < i; a_ii = ||K~_{q_i} - projection||.
  Eigen::MatrixXd gram_A;

  std::size_t size() const noexcept { return params.size(); }
  Family family() const noexcept { return grid.family; }

  /// Columns E_1..E_n.
  Eigen::MatrixXd basis() const {
    Eigen::MatrixXd b(grid.size(), static_cast<Eigen::Index>(E.size()));
    for (std::size_t k = 0; k < E.size(); ++k) b.col(static_cast<Eigen::Index>(k)) = E[k];
    return b;
  }

  /// <E_i, E_j> under grid_inner.
  Eigen::MatrixXd gram() const {
    const Eigen::MatrixXd b = basis();
    return b.transpose() * grid.weights.asDiagonal() * b;
  }
};

inline OrthoSystem make_system(const BoundaryGrid& grid, std::optional<RepeatRule> rule = std::nullopt) {
  OrthoSystem s;
  s.grid = grid;
  s.rule = rule ? *rule : RepeatRule::exact(grid.family);
  s.gram_A.resize(0, 0);
  return s;
}

/// Outcome of one Gram-Schmidt step.
struct GsResult {
  KernelParam param;
  Eigen::VectorXd kernel;       // K~_q on the grid
  Eigen::VectorXd E;            // normalized residual
  Eigen::VectorXd projections;  // <E_j, K~_q>, j = 1..n
  double denominator = 0.0;     // ||K~_q - Sum_j <K~_q, E_j> E_j||
};

enum class GsPath {
  automatic,  // multiplicity from the system's repeat rule
  as_given,   // use q's order unchanged
};

/// Orthonormalizes K~_q against the system (two classical passes).
inline GsResult gs_step(const OrthoSystem& system, const KernelParam& q, GsPath path = GsPath::automatic) {
  if (q.family() != system.family()) throw mixed_family_error();
  const KernelParam param =
      path == GsPath::automatic ? q.with_order(system.rule.order_after(q.with_order(1), system.params)) : q;
  const auto& w = system.grid.weights;
  GsResult g{param, kernel_on_grid(param, system.grid), {}, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(system.size())), 0.0};
  const double knorm = std::sqrt(grid_norm_sq(g.kernel, system.grid));
  Eigen::VectorXd v = g.kernel;
  for (int pass = 0; pass < 2; ++pass) {
    Eigen::VectorXd proj(static_cast<Eigen::Index>(system.size()));
    for (std::size_t j = 0; j < system.size(); ++j)
      proj[static_cast<Eigen::Index>(j)] = (v.array() * system.E[j].array() * w.array()).sum();
    for (std::size_t j = 0; j < system.size(); ++j) v -= proj[static_cast<Eigen::Index>(j)] * system.E[j];
    g.projections += proj;
  }
  g.denominator = std::sqrt(grid_norm_sq(v, system.grid));
  if (!(g.denominator > gs_tolerance * knorm))
    throw degenerate_candidate_error("candidate kernel lies in the span of the current system", g.denominator);
  g.E = v / g.denominator;
  return g;
}

/// Appends a Gram-Schmidt result to the system.
inline void append(OrthoSystem& system, GsResult g) {
  const auto n = static_cast<Eigen::Index>(system.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 1, n + 1);
  if (n > 0) a.topLeftCorner(n, n) = system.gram_A;
  a.block(n, 0, 1, n) = g.projections.transpose();
  a(n, n) = g.denominator;
  system.gram_A = std::move(a);
  system.params.push_back(g.param);
  system.E.push_back(std::move(g.E));
  system.raw_K.push_back(std::move(g.kernel));
}

/// Grid functions f_i (columns, M x Q) with nonnegative weights w_i.
struct WeightedSlices {
  Eigen::MatrixXd values;
  Eigen::VectorXd weights;

  static WeightedSlices single(const Eigen::VectorXd& f) {
    return {f, Eigen::VectorXd::Ones(1)};
  }
};

struct SelectionOptions {
  double tol = 1e-4;
  int max_iter = 100;
  bool refine = false;  // 3 rounds of local refinement around the grid argmax
};

/// Per-iteration record of the maximal selection.
struct SelectionAudit {
  std::vector<long> grid_index;         // argmax over the candidate grid
  std::vector<double> grid_objective;   // its objective
  std::vector<double> runner_up;        // best objective among the other grid candidates
  std::vector<double> objective;        // objective of the accepted parameter
  std::vector<bool> refined;            // accepted parameter came from refinement
};

class SelectionEngine {
 public:
  struct Best {
    long index = -1;
    double objective = -1.0;
    double runner_up = -1.0;
  };

  SelectionEngine(const CandidateSet& candidates, WeightedSlices slices, OrthoSystem start)
      : cands_(candidates), system_(std::move(start)), omega_(std::move(slices.weights)) {
    const BoundaryGrid& grid = system_.grid;
    if (cands_.family() != grid.family) throw mixed_family_error("candidates do not match the grid family");
    check_conforms(grid, slices.values.rows(), "selection slices");
    if (omega_.size() != slices.values.cols()) throw dimension_mismatch_error("one weight per slice required");
    if ((omega_.array() < 0.0).any()) throw invalid_parameter("slice weights must be nonnegative");
    system_.rule = cands_.repeat_rule();
    sw_ = grid.weights.asDiagonal() * slices.values;
    norm_sq_ = (omega_.array() * (slices.values.array() * sw_.array()).colwise().sum().transpose()).sum();

    const auto nc = static_cast<Eigen::Index>(cands_.size());
    const Eigen::Index m = grid.size();
    k_.resize(m, nc);
    knorm2_.resize(nc);
    order_.assign(static_cast<std::size_t>(nc), 1);
    available_.assign(static_cast<std::size_t>(nc), 1);
    for (Eigen::Index j = 0; j < nc; ++j) {
      const auto& q = cands_[static_cast<std::size_t>(j)];
      order_[j] = system_.rule.order_after(q, system_.params);
      fill_column(j);
    }
    r_ = sw_.transpose() * k_;
    basis_ = system_.basis();
    f_ = sw_.transpose() * basis_;
    den2_ = knorm2_;
    captured_ = 0.0;
    if (system_.size() > 0) {
      const Eigen::MatrixXd c = basis_.transpose() * grid.weights.asDiagonal() * k_;
      r_.noalias() -= f_ * c;
      den2_ -= c.array().square().colwise().sum().transpose().matrix();
      captured_ = (omega_.array() * f_.array().square().rowwise().sum()).sum();
    }
  }

  const OrthoSystem& system() const noexcept { return system_; }
  OrthoSystem release() { return std::move(system_); }
  double norm_sq() const noexcept { return norm_sq_; }
  /// Sum_i w_i Sum_k <f_i, E_k>^2.
  double captured() const noexcept { return captured_; }
  /// <f_i, E_k>, Q x n.
  const Eigen::MatrixXd& slice_coefficients() const noexcept { return f_; }
  int order(long j) const { return order_[static_cast<std::size_t>(j)]; }
  KernelParam candidate(long j) const { return cands_[static_cast<std::size_t>(j)].with_order(order(j)); }
  void disable(long j) { available_[static_cast<std::size_t>(j)] = 0; }

  /// Sum_i w_i <f_i, E^q>^2 per candidate; -1 for degenerate or unusable ones.
  Eigen::VectorXd objectives() const {
    Eigen::VectorXd obj = (r_.array().square().colwise() * omega_.array()).colwise().sum().transpose();
    for (Eigen::Index j = 0; j < obj.size(); ++j) {
      if (!available_[j] || !(den2_[j] > degenerate_fraction * knorm2_[j]))
        obj[j] = -1.0;
      else
        obj[j] /= den2_[j];
    }
    return obj;
  }

  /// Grid argmax, smallest index on ties.
  Best best() const {
    const Eigen::VectorXd obj = objectives();
    Best b;
    for (Eigen::Index j = 0; j < obj.size(); ++j) {
      if (obj[j] > b.objective) {
        b.runner_up = b.objective;
        b.objective = obj[j];
        b.index = static_cast<long>(j);
      } else if (obj[j] > b.runner_up) {
        b.runner_up = obj[j];
      }
    }
    if (b.index < 0 || b.objective < 0.0) throw all_degenerate_error("every candidate is degenerate");
    return b;
  }

  /// Objective of an arbitrary parameter by full projection; -1 if degenerate.
  double evaluate(const KernelParam& q) const {
    Eigen::VectorXd col;
    try {
      col = kernel_on_grid(q, system_.grid);
    } catch (const step_underflow_error&) {
      return -1.0;
    }
    const Eigen::VectorXd wcol = system_.grid.weights.cwiseProduct(col);
    const double kn2 = col.dot(wcol);
    const Eigen::VectorXd c = basis_.transpose() * wcol;
    const double d2 = kn2 - c.squaredNorm();
    if (!std::isfinite(kn2) || !(d2 > degenerate_fraction * kn2)) return -1.0;
    const Eigen::VectorXd r = sw_.transpose() * col - f_ * c;
    return (omega_.array() * r.array().square()).sum() / d2;
  }

  /// Orthonormalizes q (order as given), appends it and updates all candidates.
  void accept(const KernelParam& q) {
    GsResult g = gs_step(system_, q, GsPath::as_given);
    const Eigen::VectorXd e = g.E;
    const KernelParam param = g.param;
    append(system_, std::move(g));
    const Eigen::VectorXd we = system_.grid.weights.cwiseProduct(e);
    const Eigen::VectorXd c = k_.transpose() * we;
    const Eigen::VectorXd f = slice_project(e);
    r_.noalias() -= f * c.transpose();
    den2_ -= c.cwiseAbs2();
    basis_.conservativeResize(Eigen::NoChange, basis_.cols() + 1);
    basis_.col(basis_.cols() - 1) = e;
    f_.conservativeResize(Eigen::NoChange, f_.cols() + 1);
    f_.col(f_.cols() - 1) = f;
    captured_ += (omega_.array() * f.array().square()).sum();

    for (Eigen::Index j = 0; j < k_.cols(); ++j) {
      if (!available_[j]) continue;
      const auto& cand = cands_[static_cast<std::size_t>(j)];
      if (!system_.rule.matches(cand, param)) continue;
      const int next = system_.rule.order_after(cand, system_.params);
      if (next == order_[j]) continue;
      order_[j] = next;
      fill_column(j);
      if (!available_[j]) continue;
      const Eigen::VectorXd wk = system_.grid.weights.cwiseProduct(k_.col(j));
      const Eigen::VectorXd cj = basis_.transpose() * wk;
      r_.col(j) = sw_.transpose() * k_.col(j) - f_ * cj;
      den2_[j] = knorm2_[j] - cj.squaredNorm();
    }
  }

  /// <f_i, v> for every slice.
  Eigen::VectorXd slice_project(const Eigen::VectorXd& v) const { return sw_.transpose() * v; }

  static constexpr double degenerate_fraction = gs_tolerance * gs_tolerance;

 private:
  void fill_column(Eigen::Index j) {
    try {
      k_.col(j) = kernel_on_grid(cands_[static_cast<std::size_t>(j)].with_order(order_[j]), system_.grid);
      knorm2_[j] = k_.col(j).cwiseAbs2().dot(system_.grid.weights);
      if (!std::isfinite(knorm2_[j]) || !(knorm2_[j] > 0.0)) throw step_underflow_error("unusable column");
    } catch (const step_underflow_error&) {
      k_.col(j).setZero();
      knorm2_[j] = 0.0;
      available_[j] = 0;
    }
  }

  const CandidateSet& cands_;
  OrthoSystem system_;
  Eigen::VectorXd omega_;
  Eigen::MatrixXd sw_;     // W f_i, M x Q
  Eigen::MatrixXd k_;      // candidate columns, M x C
  Eigen::VectorXd knorm2_;
  Eigen::VectorXd den2_;
  Eigen::MatrixXd r_;      // Q x C
  Eigen::MatrixXd basis_;  // M x n
  Eigen::MatrixXd f_;      // Q x n
  std::vector<int> order_;
  std::vector<char> available_;
  double norm_sq_ = 0.0;
  double captured_ = 0.0;
};

/// Result of a greedy run over weighted slices.
struct GreedyResult {
  OrthoSystem system;
  Eigen::MatrixXd slice_coeffs;  // <f_i, E_k>, Q x n
  std::vector<double> energy_trace;
  std::vector<double> relative_error_trace;
  double norm_sq = 0.0;
  SelectionAudit audit;
  bool converged = false;
};

/// Iterates maximal selection and Gram-Schmidt until the weighted relative
/// error drops below tol or max_iter atoms are selected.
inline GreedyResult greedy_decompose(const BoundaryGrid& grid, const WeightedSlices& slices,
                                     const CandidateSet& candidates, const SelectionOptions& opt) {
  if (!(opt.tol > 0.0)) throw invalid_parameter("tolerance must be positive");
  if (opt.max_iter < 1) throw invalid_parameter("max_iter must be >= 1");
  if (opt.refine && !candidates.refinable()) throw invalid_parameter("refinement needs a gridded candidate set");
  SelectionEngine engine(candidates, slices, make_system(grid, candidates.repeat_rule()));
  GreedyResult out;
  out.norm_sq = engine.norm_sq();
  if (!(out.norm_sq > 0.0)) throw invalid_parameter("signal has zero norm");
  double err = 1.0;
  while (static_cast<int>(engine.system().size()) < opt.max_iter) {
    const auto b = engine.best();
    KernelParam q = engine.candidate(b.index);
    double obj = b.objective;
    bool refined = false;
    if (opt.refine) {
      for (int round = 1; round <= 3; ++round) {
        const KernelParam centre = q;
        for (const auto& p : candidates.refinement_stencil(centre, round)) {
          const KernelParam pq = p.with_order(engine.system().rule.order_after(p, engine.system().params));
          const double v = engine.evaluate(pq);
          if (v > obj) {
            obj = v;
            q = pq;
            refined = true;
          }
        }
      }
    }
    if (std::sqrt(obj) < 1e-14 * std::sqrt(out.norm_sq))
      throw no_progress_error("maximal objective vanished with relative error " + std::to_string(err) +
                              " still above tolerance");
    try {
      engine.accept(q);
    } catch (const degenerate_candidate_error&) {
      if (refined) throw;
      engine.disable(b.index);
      continue;
    }
    out.audit.grid_index.push_back(b.index);
    out.audit.grid_objective.push_back(b.objective);
    out.audit.runner_up.push_back(b.runner_up);
    out.audit.objective.push_back(obj);
    out.audit.refined.push_back(refined);
    out.energy_trace.push_back(engine.captured());
    err = (out.norm_sq - engine.captured()) / out.norm_sq;
    out.relative_error_trace.push_back(err);
    if (err < opt.tol) {
      out.converged = true;
      break;
    }
  }
  out.slice_coeffs = engine.slice_coefficients();
  out.system = engine.release();
  return out;
}

/// Deterministic expansion of one boundary function.
struct Expansion {
  OrthoSystem system;
  std::vector<double> coeffs;          // <G, E_k>
  std::vector<double> energy_trace;    // cumulative Sum_k <G, E_k>^2
  std::vector<double> relative_error_trace;
  double signal_norm_sq = 0.0;
  SelectionAudit audit;
  bool converged = false;

  /// G - Sum_k <G, E_k> E_k on the grid.
  Eigen::VectorXd residual(const Eigen::VectorXd& g) const {
    Eigen::VectorXd r = g;
    for (std::size_t k = 0; k < coeffs.size(); ++k) r -= coeffs[k] * system.E[k];
    return r;
  }
};

/// Selected parameter and its objective |<G, E^q>|.
struct MaximalSelection {
  KernelParam param;
  double objective;
};

inline MaximalSelection maximal_selection(const Eigen::VectorXd& g, const OrthoSystem& system,
                                          const CandidateSet& candidates) {
  SelectionEngine engine(candidates, WeightedSlices::single(g), system);
  const auto b = engine.best();
  return {engine.candidate(b.index), std::sqrt(b.objective)};
}

inline Expansion poafd_decompose(const Eigen::VectorXd& g, const BoundaryGrid& grid, const CandidateSet& candidates,
                                 const SelectionOptions& opt) {
  GreedyResult r = greedy_decompose(grid, WeightedSlices::single(g), candidates, opt);
  Expansion e;
  e.system = std::move(r.system);
  e.coeffs.assign(r.slice_coeffs.data(), r.slice_coeffs.data() + r.slice_coeffs.size());
  e.energy_trace = std::move(r.energy_trace);
  e.relative_error_trace = std::move(r.relative_error_trace);
  e.signal_norm_sq = r.norm_sq;
  e.audit = std::move(r.audit);
  e.converged = r.converged;
  return e;
}

/// Max over each shell of Sum_i w_i <f_i, E^q>^2 against the given system.
inline std::vector<double> shell_profile(const WeightedSlices& slices, const OrthoSystem& system,
                                         const std::vector<std::vector<KernelParam>>& shells) {
  std::vector<double> out;
  out.reserve(shells.size());
  for (const auto& shell : shells) {
    const CandidateSet set = CandidateSet::from_list(shell, system.rule);
    SelectionEngine engine(set, slices, system);
    const Eigen::VectorXd obj = engine.objectives();
    out.push_back(std::max(0.0, obj.maxCoeff()));
  }
  return out;
}

/// Disk shells r = radii[j] with `angles` equispaced angles.
inline std::vector<std::vector<KernelParam>> disk_shells(const std::vector<double>& radii, int angles) {
  std::vector<std::vector<KernelParam>> shells;
  for (double r : radii) {
    std::vector<KernelParam> shell;
    for (int k = 0; k < angles; ++k) shell.emplace_back(DiskParam(r, two_pi * k / angles));
    shells.push_back(std::move(shell));
  }
  return shells;
}

/// max over angles of |<G, E_q>| for each radius, against an empty system.
inline std::vector<double> bvc_scan(const Eigen::VectorXd& g, const BoundaryGrid& grid, const std::vector<double>& radii,
                                    int angles = 128) {
  for (std::size_t i = 1; i < radii.size(); ++i)
    if (!(radii[i] > radii[i - 1])) throw invalid_parameter("bvc_scan radii must be strictly increasing");
  std::vector<double> p = shell_profile(WeightedSlices::single(g), make_system(grid), disk_shells(radii, angles));
  for (double& v : p) v = std::sqrt(v);
  return p;
}

}  // namespace spoafd
