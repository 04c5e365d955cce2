#pragma once

// Interior solutions from boundary expansions. Each (multiple) kernel lifts
// to an exact solution through the semigroup identity, so a boundary
// expansion Sum_k F_k E_k = Sum_k C_k K~_{q_k} becomes u = Sum_k C_k lift(q_k).
// C is recovered from F through the recorded lower-triangular Gram-Schmidt
// matrix.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "spoafd/discretize.hpp"
#include "spoafd/errors.hpp"
#include "spoafd/kernels.hpp"
#include "spoafd/poafd.hpp"
#include "spoafd/wide.hpp"

namespace spoafd {

/// Solves C A = F (A = system.gram_A restricted to len(F)) by back-substitution.
inline std::vector<double> triangular_coefficients(const std::vector<double>& F, const OrthoSystem& system) {
  const std::size_t n = F.size();
  if (n > system.size()) throw dimension_mismatch_error("more coefficients than system atoms");
  const Eigen::MatrixXd& a = system.gram_A;
  std::vector<double> c(n, 0.0);
  for (std::size_t jj = n; jj-- > 0;) {
    const auto j = static_cast<Eigen::Index>(jj);
    if (!(a(j, j) >= 1e-12)) throw singular_system_error("Gram-Schmidt diagonal entry " + std::to_string(a(j, j)));
    double s = F[jj];
    for (std::size_t k = jj + 1; k < n; ++k) s -= a(static_cast<Eigen::Index>(k), j) * c[k];
    c[jj] = s / a(j, j);
  }
  return c;
}

/// Sum_k F_k E_k on the grid.
inline Eigen::VectorXd boundary_reconstruction(const std::vector<double>& F, const OrthoSystem& system) {
  if (F.size() > system.size()) throw dimension_mismatch_error("more coefficients than system atoms");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(system.grid.size());
  for (std::size_t k = 0; k < F.size(); ++k) g += F[k] * system.E[k];
  return g;
}

/// Sum_k C_k K~_{q_k} on the grid.
inline Eigen::VectorXd kernel_combination(const std::vector<double>& C, const OrthoSystem& system) {
  if (C.size() > system.size()) throw dimension_mismatch_error("more coefficients than system atoms");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(system.grid.size());
  for (std::size_t k = 0; k < C.size(); ++k) g += C[k] * system.raw_K[k];
  return g;
}

/// The selected kernels orthonormalized again in quad precision, by the
/// same two-pass Gram-Schmidt. Nearly dependent atoms make C = F A^{-T}
/// grow far beyond 1 (1e13 on the Brownian bridge), and Sum C_k K~_k
/// reproduces Sum F_k E_k only if that cancellation is carried in wide.
struct WideSystem {
  Family family = Family::disk;
  std::vector<KernelParam> params;
  std::vector<wide> weights;
  std::vector<std::vector<wide>> K;  // K~_{q_k} on the grid
  std::vector<std::vector<wide>> E;
  std::vector<std::vector<wide>> A;  // A[k][j], j <= k
  std::size_t size() const noexcept { return params.size(); }
};

namespace detail {

inline wide wide_inner(const std::vector<wide>& a, const std::vector<wide>& b, const std::vector<wide>& w) {
  wide s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += w[i] * a[i] * b[i];
  return s;
}

inline double wide_relative_gap(const std::vector<wide>& a, const std::vector<wide>& b, const std::vector<wide>& w) {
  wide d = 0, n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += w[i] * (a[i] - b[i]) * (a[i] - b[i]);
    n += w[i] * b[i] * b[i];
  }
  return n > 0 ? static_cast<double>(math::sqrt(d / n)) : static_cast<double>(math::sqrt(d));
}

}  // namespace detail

inline WideSystem make_wide_system(const OrthoSystem& system) {
  WideSystem ws;
  ws.family = system.family();
  ws.params = system.params;
  const auto m = static_cast<std::size_t>(system.grid.size());
  ws.weights.resize(m);
  for (std::size_t i = 0; i < m; ++i) ws.weights[i] = system.grid.weights[static_cast<Eigen::Index>(i)];
  for (std::size_t k = 0; k < ws.size(); ++k) {
    std::vector<wide> v(m);
    for (std::size_t i = 0; i < m; ++i)
      v[i] = kernel_trace_as<wide>(ws.params[k], wide(system.grid.nodes[static_cast<Eigen::Index>(i)]));
    ws.K.push_back(v);
    std::vector<wide> row(k + 1, 0);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < k; ++j) {
        const wide c = detail::wide_inner(v, ws.E[j], ws.weights);
        row[j] += c;
        for (std::size_t i = 0; i < m; ++i) v[i] -= c * ws.E[j][i];
      }
    }
    const wide norm = math::sqrt(detail::wide_inner(v, v, ws.weights));
    if (!(norm > 0)) throw singular_system_error("kernel " + std::to_string(k + 1) + " is dependent in quad precision");
    for (auto& x : v) x /= norm;
    row[k] = norm;
    ws.E.push_back(std::move(v));
    ws.A.push_back(std::move(row));
  }
  return ws;
}

/// <realization, E_k> in quad precision.
inline std::vector<wide> wide_coefficients(const WideSystem& ws, const Eigen::VectorXd& realization) {
  if (realization.size() != static_cast<Eigen::Index>(ws.weights.size()))
    throw dimension_mismatch_error("realization does not match the grid");
  std::vector<wide> g(ws.weights.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = realization[static_cast<Eigen::Index>(i)];
  std::vector<wide> f;
  for (const auto& e : ws.E) f.push_back(detail::wide_inner(g, e, ws.weights));
  return f;
}

/// Back-substitution C A = F on the quad-precision matrix.
inline std::vector<wide> triangular_coefficients(const std::vector<wide>& F, const WideSystem& ws) {
  const std::size_t n = F.size();
  if (n > ws.size()) throw dimension_mismatch_error("more coefficients than system atoms");
  std::vector<wide> c(n, 0);
  for (std::size_t j = n; j-- > 0;) {
    if (!(ws.A[j][j] >= 1e-12))
      throw singular_system_error("Gram-Schmidt diagonal entry " + std::to_string(static_cast<double>(ws.A[j][j])));
    wide s = F[j];
    for (std::size_t k = j + 1; k < n; ++k) s -= ws.A[k][j] * c[k];
    c[j] = s / ws.A[j][j];
  }
  return c;
}

/// Sum_k F_k E_k and Sum_k C_k K~_k on the grid, in quad precision.
inline std::vector<wide> wide_reconstruction(const std::vector<wide>& F, const WideSystem& ws) {
  std::vector<wide> g(ws.weights.size(), 0);
  for (std::size_t k = 0; k < F.size(); ++k)
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += F[k] * ws.E[k][i];
  return g;
}
inline std::vector<wide> wide_combination(const std::vector<wide>& C, const WideSystem& ws) {
  std::vector<wide> g(ws.weights.size(), 0);
  for (std::size_t k = 0; k < C.size(); ++k)
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += C[k] * ws.K[k][i];
  return g;
}

/// ||Sum C_k K~_k - Sum F_k E_k|| / ||Sum F_k E_k||.
inline double reconstruction_gap(const std::vector<wide>& F, const std::vector<wide>& C, const WideSystem& ws) {
  return detail::wide_relative_gap(wide_combination(C, ws), wide_reconstruction(F, ws), ws.weights);
}

inline Eigen::VectorXd to_double(const std::vector<wide>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = static_cast<double>(v[i]);
  return out;
}

/// u = Sum_k C_k lift(q_k) on the disk or the upper half-plane.
struct SolutionField {
  Family family = Family::disk;
  std::vector<KernelParam> atoms;
  std::vector<wide> coeffs;
  std::string realization_id;

  /// Disk field at the Cartesian point (x, y).
  template <class Real = wide>
  Real disk_at(Real x, Real y) const {
    Real s = 0;
    for (std::size_t k = 0; k < atoms.size(); ++k)
      if (coeffs[k] != 0) s += Real(coeffs[k]) * lift_disk_atom<Real>(atoms[k], x, y);
    return s;
  }

  /// Heat field at (t, x).
  template <class Real = wide>
  Real heat_at(Real t, Real x) const {
    Real s = 0;
    for (std::size_t k = 0; k < atoms.size(); ++k)
      if (coeffs[k] != 0) s += Real(coeffs[k]) * lift_heat_atom<Real>(atoms[k], t, x);
    return s;
  }

  /// Sum_k |C_k lift(q_k)|, the scale of rounding in an evaluation.
  template <class Real = wide>
  Real magnitude_disk(Real x, Real y) const {
    Real s = 0;
    for (std::size_t k = 0; k < atoms.size(); ++k) s += math::abs(Real(coeffs[k]) * lift_disk_atom<Real>(atoms[k], x, y));
    return s;
  }
  template <class Real = wide>
  Real magnitude_heat(Real t, Real x) const {
    Real s = 0;
    for (std::size_t k = 0; k < atoms.size(); ++k) s += math::abs(Real(coeffs[k]) * lift_heat_atom<Real>(atoms[k], t, x));
    return s;
  }

  /// Evaluated in quad precision, rounded once.
  double operator()(const DiskPoint& p) const {
    if (family != Family::disk) throw mixed_family_error("heat field evaluated at a disk point");
    if (!(p.radius >= 0.0 && p.radius < 1.0)) throw invalid_parameter("interior disk point needs 0 <= rho < 1");
    const wide rho = p.radius, th = p.angle;
    return static_cast<double>(disk_at<wide>(rho * math::cos(th), rho * math::sin(th)));
  }
  double operator()(const HeatPoint& p) const {
    if (family != Family::heat) throw mixed_family_error("disk field evaluated at a heat point");
    if (!(p.time > 0.0)) throw invalid_parameter("interior heat point needs t > 0");
    return static_cast<double>(heat_at<wide>(p.time, p.x));
  }
};

inline SolutionField lift_field(std::vector<wide> C, const std::vector<KernelParam>& atoms, std::string id = {}) {
  if (C.size() != atoms.size()) throw dimension_mismatch_error("one lifted coefficient per atom required");
  SolutionField f;
  f.family = atoms.empty() ? Family::disk : atoms.front().family();
  for (const auto& a : atoms)
    if (a.family() != f.family) throw mixed_family_error();
  f.atoms = atoms;
  f.coeffs = std::move(C);
  f.realization_id = std::move(id);
  return f;
}

inline SolutionField lift_field(const std::vector<double>& C, const std::vector<KernelParam>& atoms,
                                std::string id = {}) {
  return lift_field(std::vector<wide>(C.begin(), C.end()), atoms, std::move(id));
}

/// Field of a realization: F on the quad-precision system, C by back-substitution.
inline SolutionField field_from_realization(const Eigen::VectorXd& realization, const WideSystem& ws,
                                            std::string id = {}) {
  SolutionField f = lift_field(triangular_coefficients(wide_coefficients(ws, realization), ws), ws.params, std::move(id));
  f.family = ws.family;
  return f;
}

/// Field from double-precision coefficients F_n against `system`.
inline SolutionField field_from_coefficients(const std::vector<double>& F, const OrthoSystem& system,
                                             std::string id = {}) {
  const std::vector<double> c = triangular_coefficients(F, system);
  std::vector<KernelParam> atoms(system.params.begin(), system.params.begin() + static_cast<long>(F.size()));
  SolutionField f = lift_field(c, atoms, std::move(id));
  f.family = system.family();
  return f;
}

/// Field values on the boundary grid pulled inside: u(rho e^{i t_j}) or u(t, x_j).
inline Eigen::VectorXd interior_trace(const SolutionField& field, const BoundaryGrid& grid, double level) {
  Eigen::VectorXd v(grid.size());
  for (Eigen::Index j = 0; j < grid.size(); ++j)
    v[j] = field.family == Family::disk ? field(DiskPoint{level, grid.nodes[j]}) : field(HeatPoint{level, grid.nodes[j]});
  return v;
}

/// ||u(level, .) - reconstruction|| per level (radii toward 1, or times toward 0).
inline std::vector<double> boundary_attainment(const SolutionField& field, const Eigen::VectorXd& reconstruction,
                                               const BoundaryGrid& grid, const std::vector<double>& schedule) {
  check_conforms(grid, reconstruction.size(), "boundary reconstruction");
  std::vector<double> gaps;
  for (double level : schedule) gaps.push_back(std::sqrt(grid_norm_sq(interior_trace(field, grid, level) - reconstruction, grid)));
  return gaps;
}

/// 200 (by default) seeded interior probes: rho = 0.9 sqrt(U), uniform angle.
inline std::vector<DiskPoint> disk_probes(int count, std::uint64_t seed, double rho_max = 0.9) {
  auto rng = stream_rng(seed, 0x70726f6265ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<DiskPoint> out;
  for (int i = 0; i < count; ++i) {
    const double rho = rho_max * std::sqrt(unit(rng));
    out.push_back({rho, two_pi * unit(rng)});
  }
  return out;
}

/// Seeded probes with t in [t_min, t_max], x in [-x_max, x_max].
inline std::vector<HeatPoint> heat_probes(int count, std::uint64_t seed, double t_min = 0.05, double t_max = 2.0,
                                          double x_max = 12.0) {
  auto rng = stream_rng(seed, 0x70726f6265ULL);
  std::uniform_real_distribution<double> t(t_min, t_max);
  std::uniform_real_distribution<double> x(-x_max, x_max);
  std::vector<HeatPoint> out;
  for (int i = 0; i < count; ++i) {
    const double ti = t(rng);
    out.push_back({ti, x(rng)});
  }
  return out;
}

struct ResidualStats {
  double h = 0.0;
  double max_abs = 0.0;
  double rms = 0.0;
  double floor_rms = 0.0;  // rounding level of the stencil at this step
};

namespace detail {

// 5-point Laplacian at (x, y), and Sum |terms| times the stencil weight sum.
template <class Real>
std::pair<Real, Real> laplace_stencil(const SolutionField& f, Real x, Real y, Real h) {
  const Real c = f.disk_at<Real>(x, y);
  const Real lap = (f.disk_at<Real>(x + h, y) + f.disk_at<Real>(x - h, y) + f.disk_at<Real>(x, y + h) +
                    f.disk_at<Real>(x, y - h) - 4 * c) /
                   (h * h);
  const Real floor = math::epsilon<Real>() * 8 * f.magnitude_disk<Real>(x, y) / (h * h);
  return {lap, floor};
}

// (u(t + h^2, x) - u(t, x)) / h^2 - (u(t, x + h) - 2 u(t, x) + u(t, x - h)) / h^2.
template <class Real>
std::pair<Real, Real> heat_stencil(const SolutionField& f, Real t, Real x, Real h) {
  const Real dt = h * h;
  const Real c = f.heat_at<Real>(t, x);
  const Real ut = (f.heat_at<Real>(t + dt, x) - c) / dt;
  const Real uxx = (f.heat_at<Real>(t, x + h) - 2 * c + f.heat_at<Real>(t, x - h)) / (h * h);
  const Real floor = math::epsilon<Real>() * 6 * f.magnitude_heat<Real>(t, x) / (h * h);
  return {ut - uxx, floor};
}

template <class Real, class Point>
ResidualStats residual_impl(const SolutionField& field, const std::vector<Point>& probes, double h) {
  ResidualStats s;
  s.h = h;
  if (probes.empty()) return s;
  long double sq = 0, fl = 0;
  for (const auto& p : probes) {
    std::pair<Real, Real> r;
    if constexpr (std::is_same_v<Point, DiskPoint>) {
      r = laplace_stencil<Real>(field, Real(p.radius) * math::cos(Real(p.angle)),
                                Real(p.radius) * math::sin(Real(p.angle)), Real(h));
    } else {
      r = heat_stencil<Real>(field, Real(p.time), Real(p.x), Real(h));
    }
    const double v = static_cast<double>(r.first);
    s.max_abs = std::max(s.max_abs, std::abs(v));
    sq += static_cast<long double>(r.first) * static_cast<long double>(r.first);
    fl += static_cast<long double>(r.second) * static_cast<long double>(r.second);
  }
  s.rms = static_cast<double>(std::sqrt(sq / probes.size()));
  s.floor_rms = static_cast<double>(std::sqrt(fl / probes.size()));
  return s;
}

}  // namespace detail

/// Stencil residual of the Laplace (disk) or heat (half-plane) equation at
/// step h, evaluated in quad precision by default.
template <class Real = wide>
ResidualStats pde_residual(const SolutionField& field, const std::vector<DiskPoint>& probes, double h) {
  if (field.family != Family::disk) throw mixed_family_error("disk probes for a heat field");
  for (const auto& p : probes)
    if (!(p.radius >= 0.0 && p.radius + h < 1.0)) throw invalid_parameter("stencil leaves the disk");
  return detail::residual_impl<Real>(field, probes, h);
}

template <class Real = wide>
ResidualStats pde_residual(const SolutionField& field, const std::vector<HeatPoint>& probes, double h) {
  if (field.family != Family::heat) throw mixed_family_error("heat probes for a disk field");
  for (const auto& p : probes)
    if (!(p.time > 0.0)) throw invalid_parameter("stencil needs t > 0");
  return detail::residual_impl<Real>(field, probes, h);
}

/// Residuals at h and h / 2 and their RMS ratio.
struct RefinementCheck {
  ResidualStats coarse;
  ResidualStats fine;
  double ratio = 0.0;
};

/// Starts at h0 and doubles h (up to h_max) until the fine residual is at
/// least 100 times its rounding level, so the ratio measures truncation.
template <class Point>
RefinementCheck refinement_check(const SolutionField& field, const std::vector<Point>& probes, double h0 = 1e-3,
                                 double h_max = 0.05) {
  RefinementCheck out;
  for (double h = h0;; h *= 2.0) {
    h = std::min(h, h_max);
    out.coarse = pde_residual(field, probes, h);
    out.fine = pde_residual(field, probes, h / 2);
    if (out.fine.rms >= 100.0 * out.fine.floor_rms || h >= h_max) break;
  }
  out.ratio = out.coarse.rms / out.fine.rms;
  return out;
}

/// max |gram_A - chol(closed-form Gram)|, relative to max |gram_A|.
inline double gram_crosscheck(const OrthoSystem& system) {
  const auto n = static_cast<Eigen::Index>(system.size());
  if (n == 0) return 0.0;
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = kernel_inner(system.params[i], system.params[j]);
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd l = llt.matrixL();
  return (l - system.gram_A).cwiseAbs().maxCoeff() / system.gram_A.cwiseAbs().maxCoeff();
}

}  // namespace spoafd
