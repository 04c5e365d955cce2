#pragma once

// Poisson (unit circle) and heat (real line) kernel dictionaries.
//
// Disk atoms are P_r(t - alpha) = (1 - r^2) / (1 - 2 r cos(t - alpha) + r^2)
// against the normalized measure dt / (2 pi). Heat atoms are the Gaussians
// phi_s(x - y) = (4 pi s)^{-1/2} exp(-(x - y)^2 / (4 s)) against dx. Both
// families are closed under their semigroup:
//   <P_{r1,a1}, P_{r2,a2}> = P_{r1 r2}(a1 - a2),
//   <phi_{s1}(. - y1), phi_{s2}(. - y2)> = phi_{s1 + s2}(y1 - y2),
// and the same identity lifts each boundary atom to an interior solution.
//
// Multiple kernels (multiplicity l > 1) are the (l - 1)-th derivative of the
// atom along its radial parameter: d/dr for disk atoms, d/ds for heat atoms.
// First derivatives are analytic; higher ones are central differences of the
// analytic first derivative.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <variant>

#include "spoafd/errors.hpp"
#include "spoafd/wide.hpp"

namespace spoafd {

enum class Family { disk, heat };

inline const char* to_string(Family f) { return f == Family::disk ? "disk" : "heat"; }

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Reduces an angle to [0, 2 pi).
inline double reduce_angle(double a) {
  double r = std::fmod(a, two_pi);
  if (r < 0.0) r += two_pi;
  if (r >= two_pi) r = 0.0;
  return r;
}

/// Point r e^{i alpha} of the open unit disk.
class DiskParam {
 public:
  DiskParam(double radius, double angle) : radius_(radius), angle_(reduce_angle(angle)) {
    if (!(radius >= 0.0 && radius < 1.0))
      throw invalid_parameter("disk parameter radius must lie in [0, 1), got " + std::to_string(radius));
    if (!std::isfinite(angle)) throw invalid_parameter("disk parameter angle must be finite");
  }
  double radius() const noexcept { return radius_; }
  double angle() const noexcept { return angle_; }

 private:
  double radius_;
  double angle_;
};

/// Point (s, y) of the upper half-plane, s > 0.
class HeatParam {
 public:
  HeatParam(double time, double location) : time_(time), location_(location) {
    if (!(time > 0.0) || !std::isfinite(time))
      throw invalid_parameter("heat parameter time must be positive and finite, got " + std::to_string(time));
    if (!std::isfinite(location)) throw invalid_parameter("heat parameter location must be finite");
  }
  double time() const noexcept { return time_; }
  double location() const noexcept { return location_; }

 private:
  double time_;
  double location_;
};

/// Dictionary atom: a disk or heat point plus its multiplicity order l >= 1.
class KernelParam {
 public:
  KernelParam(DiskParam p, int order = 1) : point_(p), order_(order) { check_order(); }
  KernelParam(HeatParam p, int order = 1) : point_(p), order_(order) { check_order(); }

  Family family() const noexcept { return std::holds_alternative<DiskParam>(point_) ? Family::disk : Family::heat; }
  int order() const noexcept { return order_; }
  bool is_plain() const noexcept { return order_ == 1; }

  const DiskParam& disk() const {
    if (auto* p = std::get_if<DiskParam>(&point_)) return *p;
    throw mixed_family_error("expected a disk parameter");
  }
  const HeatParam& heat() const {
    if (auto* p = std::get_if<HeatParam>(&point_)) return *p;
    throw mixed_family_error("expected a heat parameter");
  }

  KernelParam with_order(int order) const {
    KernelParam copy = *this;
    copy.order_ = order;
    copy.check_order();
    return copy;
  }

  /// First and second coordinates: (r, alpha) or (s, y).
  double first() const { return family() == Family::disk ? disk().radius() : heat().time(); }
  double second() const { return family() == Family::disk ? disk().angle() : heat().location(); }

 private:
  void check_order() const {
    if (order_ < 1) throw invalid_parameter("multiplicity order must be >= 1");
  }

  std::variant<DiskParam, HeatParam> point_;
  int order_;
};

/// Interior point of the unit disk in polar form.
struct DiskPoint {
  double radius;
  double angle;
};

/// Interior point (t, x) of the upper half-plane.
struct HeatPoint {
  double time;
  double x;
};

namespace detail {

/// Relative finite-difference step for an m-th difference of an analytic
/// first derivative: 1e-4 for m = 1, growing towards eps^{1/(m+2)} beyond.
inline double fd_step_fraction(int m) {
  return std::max(1e-4, std::pow(std::numeric_limits<double>::epsilon(), 1.0 / (m + 2)));
}

/// m-th central difference of f at p with step h, divided by h^m.
template <class Real, class F>
Real central_difference(const F& f, Real p, int m, Real h) {
  if (m == 0) return f(p);
  Real sum = 0;
  Real binom = 1;
  for (int j = 0; j <= m; ++j) {
    const Real term = binom * f(p + (Real(m) / 2 - Real(j)) * h);
    sum += (j % 2 == 0) ? term : -term;
    binom = binom * Real(m - j) / Real(j + 1);
  }
  return sum / math::powi(h, m);
}

// Poisson kernel for signed r in (-1, 1). Denominator written as
// (1 - r)^2 + 4 r sin^2(theta / 2) to keep accuracy near r -> 1, theta -> 0.
template <class Real>
Real poisson(Real r, Real theta) {
  const Real sh = math::sin(theta / 2);
  const Real den = (1 - r) * (1 - r) + 4 * r * sh * sh;
  return (1 - r) * (1 + r) / den;
}

// d/dr of poisson(r, theta) = 2((1 + r^2) cos(theta) - 2r) / D^2.
template <class Real>
Real poisson_dr(Real r, Real theta) {
  const Real sh = math::sin(theta / 2);
  const Real s2 = sh * sh;
  const Real den = (1 - r) * (1 - r) + 4 * r * s2;
  const Real num = (1 - r) * (1 - r) - 2 * (1 + r * r) * s2;
  return 2 * num / (den * den);
}

template <class Real>
Real heat(Real s, Real z) {
  return math::exp(-z * z / (4 * s)) / math::sqrt(4 * math::pi<Real>() * s);
}

// d/ds of heat(s, z) = heat(s, z) (z^2 / (4 s^2) - 1 / (2 s)).
template <class Real>
Real heat_ds(Real s, Real z) {
  return heat(s, z) * (z * z / (4 * s * s) - 1 / (2 * s));
}

/// order-th derivative in r of poisson(r, theta), order >= 1.
template <class Real>
Real poisson_radial_derivative(Real r, Real theta, int order) {
  if (order == 1) return poisson_dr(r, theta);
  const int m = order - 1;
  const Real h = Real(fd_step_fraction(m)) * (1 - math::abs(r));
  const Real reach = Real(m) / 2 * h;
  if (!(h > 0) || !(r + reach < 1) || !(r - reach > -1))
    throw step_underflow_error("finite-difference step leaves the disk near r = " + std::to_string(double(r)));
  return central_difference<Real>([&](Real x) { return poisson_dr(x, theta); }, r, m, h);
}

/// order-th derivative in s of heat(s, z), order >= 1, with the difference
/// step taken relative to `base` (the atom's own s).
template <class Real>
Real heat_time_derivative_from(Real s, Real z, int order, Real base) {
  if (order == 1) return heat_ds(s, z);
  const int m = order - 1;
  const Real h = Real(fd_step_fraction(m)) * base;
  if (!(h > 0) || !(s - Real(m) / 2 * h > 0))
    throw step_underflow_error("finite-difference step reaches s <= 0 near s = " + std::to_string(double(s)));
  return central_difference<Real>([&](Real x) { return heat_ds(x, z); }, s, m, h);
}

template <class Real>
Real heat_time_derivative(Real s, Real z, int order) {
  return heat_time_derivative_from(s, z, order, s);
}

// Disk atom (r, alpha) lifted to the Cartesian interior point (x, y):
// P_{rho r}(theta - alpha) with rho cos(theta - alpha) = x cos(alpha) + y sin(alpha).
template <class Real>
Real disk_lift_plain(Real r, Real ca, Real sa, Real x, Real y) {
  const Real proj = x * ca + y * sa;
  const Real rho2 = x * x + y * y;
  return (1 - r * r * rho2) / (1 - 2 * r * proj + r * r * rho2);
}

template <class Real>
Real disk_lift_dr(Real r, Real ca, Real sa, Real x, Real y) {
  const Real proj = x * ca + y * sa;
  const Real rho2 = x * x + y * y;
  const Real den = 1 - 2 * r * proj + r * r * rho2;
  return 2 * (proj * (1 + r * r * rho2) - 2 * r * rho2) / (den * den);
}

}  // namespace detail

/// P_r(t - alpha) for a disk atom evaluated at boundary angle t.
inline double poisson_eval(const DiskParam& q, double t) {
  return detail::poisson(q.radius(), t - q.angle());
}

/// phi_s(x - y) for a heat atom evaluated at boundary point x.
inline double heat_eval(const HeatParam& q, double x) {
  return detail::heat(q.time(), x - q.location());
}

/// order-th derivative of the disk atom along d/dr, at boundary angle t.
inline double kernel_param_derivative(const DiskParam& q, int order, double t) {
  if (order < 1) throw invalid_parameter("derivative order must be >= 1");
  return detail::poisson_radial_derivative(q.radius(), t - q.angle(), order);
}

/// order-th derivative of the heat atom along d/ds, at boundary point x.
inline double kernel_param_derivative(const HeatParam& q, int order, double x) {
  if (order < 1) throw invalid_parameter("derivative order must be >= 1");
  return detail::heat_time_derivative(q.time(), x - q.location(), order);
}

/// Derivative of the atom at q's location; q's own multiplicity is ignored.
inline double kernel_param_derivative(const KernelParam& q, int order, double point) {
  return q.family() == Family::disk ? kernel_param_derivative(q.disk(), order, point)
                                    : kernel_param_derivative(q.heat(), order, point);
}

/// Boundary value of the (possibly multiple) kernel K~_q.
inline double kernel_trace(const KernelParam& q, double point) {
  if (q.is_plain())
    return q.family() == Family::disk ? poisson_eval(q.disk(), point) : heat_eval(q.heat(), point);
  return kernel_param_derivative(q, q.order() - 1, point);
}

/// Closed-form <K~_a, K~_b> through the semigroup identity, differentiated
/// (order - 1) times in each parameter for multiple kernels.
inline double kernel_inner(const KernelParam& a, const KernelParam& b) {
  if (a.family() != b.family()) throw mixed_family_error();
  int m1 = a.order() - 1;
  int m2 = b.order() - 1;

  if (a.family() == Family::heat) {
    const double s = a.heat().time() + b.heat().time();
    const double z = a.heat().location() - b.heat().location();
    const int m = m1 + m2;
    return m == 0 ? detail::heat(s, z) : detail::heat_time_derivative(s, z, m);
  }

  double r1 = a.disk().radius();
  double r2 = b.disk().radius();
  const double delta = a.disk().angle() - b.disk().angle();
  if (m1 == 0 && m2 == 0) return detail::poisson(r1 * r2, delta);
  if (m1 < m2) {
    std::swap(m1, m2);
    std::swap(r1, r2);
  }
  // d/dr1 P_{r1 r2} = r2 P'(r1 r2); remaining orders by central differences.
  auto first_in_r1 = [delta](double x1, double x2) { return x2 * detail::poisson_dr(x1 * x2, delta); };
  auto inner_r1 = [&](double x2) {
    if (m1 == 1) return first_in_r1(r1, x2);
    const int m = m1 - 1;
    const double h = detail::fd_step_fraction(m) * (1.0 - r1);
    return detail::central_difference<double>([&](double x1) { return first_in_r1(x1, x2); }, r1, m, h);
  };
  if (m2 == 0) return inner_r1(r2);
  const double h2 = detail::fd_step_fraction(m2) * (1.0 - r2);
  if (!(r2 + m2 / 2.0 * h2 < 1.0)) throw step_underflow_error("finite-difference step leaves the disk");
  return detail::central_difference<double>(inner_r1, r2, m2, h2);
}

/// ||K~_q|| from the closed form.
inline double kernel_norm(const KernelParam& q) {
  const double sq = kernel_inner(q, q);
  if (!std::isfinite(sq) || !(sq >= std::numeric_limits<double>::min()))
    throw degenerate_kernel_error("kernel norm underflows or is not positive (squared norm " + std::to_string(sq) + ")");
  return std::sqrt(sq);
}

/// Boundary value of K~_q computed in Real.
template <class Real>
Real kernel_trace_as(const KernelParam& q, Real point) {
  if (q.family() == Family::disk) {
    const Real theta = point - Real(q.disk().angle());
    const Real r = q.disk().radius();
    return q.is_plain() ? detail::poisson(r, theta) : detail::poisson_radial_derivative(r, theta, q.order() - 1);
  }
  const Real s = q.heat().time();
  const Real z = point - Real(q.heat().location());
  return q.is_plain() ? detail::heat(s, z) : detail::heat_time_derivative(s, z, q.order() - 1);
}

/// Disk atom lifted to the Cartesian interior point (x, y), |(x, y)| < 1.
/// Higher orders difference the lifted first derivative with the same
/// step as the boundary kernel, so the lift is exactly harmonic.
template <class Real = double>
Real lift_disk_atom(const KernelParam& q, Real x, Real y) {
  const DiskParam& p = q.disk();
  const Real r = p.radius();
  const Real ca = math::cos(Real(p.angle()));
  const Real sa = math::sin(Real(p.angle()));
  if (q.order() == 1) return detail::disk_lift_plain(r, ca, sa, x, y);
  if (q.order() == 2) return detail::disk_lift_dr(r, ca, sa, x, y);
  const int m = q.order() - 2;
  const Real h = Real(detail::fd_step_fraction(m)) * (1 - r);
  if (!(h > 0) || !(r + Real(m) / 2 * h < 1))
    throw step_underflow_error("finite-difference step leaves the disk in the lift");
  return detail::central_difference<Real>([&](Real rr) { return detail::disk_lift_dr(rr, ca, sa, x, y); }, r, m, h);
}

/// Heat atom lifted to (t, x): phi_{t+s}(x - y), or its s-derivative.
template <class Real = double>
Real lift_heat_atom(const KernelParam& q, Real t, Real x) {
  const HeatParam& p = q.heat();
  const Real s = t + Real(p.time());
  const Real z = x - Real(p.location());
  if (q.order() == 1) return detail::heat(s, z);
  return detail::heat_time_derivative_from(s, z, q.order() - 1, Real(p.time()));
}

/// Interior value of the Poisson extension of the atom at rho e^{i theta}.
inline double lift_atom(const KernelParam& q, const DiskPoint& p) {
  if (!(p.radius >= 0.0 && p.radius < 1.0)) throw invalid_parameter("interior disk point needs 0 <= rho < 1");
  return lift_disk_atom<double>(q, p.radius * std::cos(p.angle), p.radius * std::sin(p.angle));
}

/// Heat-semigroup extension of the atom at (t, x), t > 0.
inline double lift_atom(const KernelParam& q, const HeatPoint& p) {
  if (!(p.time > 0.0)) throw invalid_parameter("interior heat point needs t > 0");
  return lift_heat_atom<double>(q, p.time, p.x);
}

}  // namespace spoafd
