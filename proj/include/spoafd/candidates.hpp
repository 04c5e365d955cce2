#pragma once

// Finite candidate sets for the maximal selection sweep, the rule deciding
// when a candidate repeats an already selected parameter, and the local
// refinement stencil around an incumbent.

#include <algorithm>
#include <cmath>
#include <vector>

#include "spoafd/errors.hpp"
#include "spoafd/kernels.hpp"

namespace spoafd {

/// Decides whether two parameters coincide for multiplicity purposes.
struct RepeatRule {
  Family family = Family::disk;
  double radius = 1e-12;     // disk: Euclidean distance between r e^{i alpha}
  double log_time = 1e-12;   // heat: |ln s1 - ln s2|
  double location = 1e-12;   // heat: |y1 - y2|

  static RepeatRule exact(Family f) { return RepeatRule{f}; }

  bool matches(const KernelParam& a, const KernelParam& b) const {
    if (a.family() != family || b.family() != family) throw mixed_family_error();
    if (family == Family::disk) {
      const double r1 = a.disk().radius(), r2 = b.disk().radius();
      const double dx = r1 * std::cos(a.disk().angle()) - r2 * std::cos(b.disk().angle());
      const double dy = r1 * std::sin(a.disk().angle()) - r2 * std::sin(b.disk().angle());
      return std::hypot(dx, dy) <= radius;
    }
    return std::abs(std::log(a.heat().time()) - std::log(b.heat().time())) <= log_time &&
           std::abs(a.heat().location() - b.heat().location()) <= location;
  }

  /// Multiplicity q would receive after `selected`: 1 + number of matches.
  int order_after(const KernelParam& q, const std::vector<KernelParam>& selected) const {
    int order = 1;
    for (const auto& s : selected)
      if (matches(q, s)) ++order;
    return order;
  }
};

/// Enumerated plain atoms, with the grid geometry used for repeats and refinement.
class CandidateSet {
 public:
  /// r_j = j r_max / (radii + 1), j = 1..radii, times alpha_k = 2 pi k / angles.
  static CandidateSet disk_grid(int radii, int angles, double r_max) {
    if (radii < 1 || angles < 1) throw invalid_parameter("disk candidate grid needs >= 1 radius and >= 1 angle");
    if (!(r_max > 0.0 && r_max < 1.0)) throw invalid_parameter("r_max must lie in (0, 1)");
    CandidateSet c(Family::disk);
    c.n_first_ = radii;
    c.n_second_ = angles;
    c.d_first_ = r_max / (radii + 1);
    c.first_lo_ = 0.0;
    c.first_hi_ = radii * c.d_first_;
    c.d_second_ = two_pi / angles;
    c.params_.reserve(static_cast<std::size_t>(radii) * angles);
    for (int j = 1; j <= radii; ++j)
      for (int k = 0; k < angles; ++k) c.params_.emplace_back(DiskParam(j * c.d_first_, k * c.d_second_));
    const double r1 = c.d_first_;
    c.rule_.family = Family::disk;
    c.rule_.radius = 0.5 * std::min(c.d_first_, r1 * c.d_second_);
    return c;
  }

  /// s log-spaced on [s_min, s_max] (times values), y equispaced on
  /// [-y_half_width, y_half_width] (locations values).
  static CandidateSet heat_grid(int times, int locations, double s_min, double s_max, double y_half_width) {
    if (times < 2 || locations < 2) throw invalid_parameter("heat candidate grid needs >= 2 values per axis");
    if (!(s_min > 0.0 && s_max > s_min)) throw invalid_parameter("heat candidate times need 0 < s_min < s_max");
    if (!(y_half_width > 0.0)) throw invalid_parameter("heat candidate window must be positive");
    CandidateSet c(Family::heat);
    c.n_first_ = times;
    c.n_second_ = locations;
    c.first_lo_ = std::log(s_min);
    c.first_hi_ = std::log(s_max);
    c.second_lo_ = -y_half_width;
    c.second_hi_ = y_half_width;
    c.d_first_ = (c.first_hi_ - c.first_lo_) / (times - 1);
    c.d_second_ = 2.0 * y_half_width / (locations - 1);
    c.params_.reserve(static_cast<std::size_t>(times) * locations);
    for (int i = 0; i < times; ++i) {
      const double s = i == times - 1 ? s_max : std::exp(c.first_lo_ + i * c.d_first_);
      for (int k = 0; k < locations; ++k) {
        const double y = k == locations - 1 ? y_half_width : -y_half_width + k * c.d_second_;
        c.params_.emplace_back(HeatParam(s, y));
      }
    }
    c.rule_.family = Family::heat;
    c.rule_.log_time = 0.5 * c.d_first_;
    c.rule_.location = 0.5 * c.d_second_;
    return c;
  }

  /// Arbitrary plain atoms; refinement is unavailable.
  static CandidateSet from_list(std::vector<KernelParam> params, RepeatRule rule) {
    if (params.empty()) throw invalid_parameter("candidate set must be nonempty");
    CandidateSet c(params.front().family());
    for (const auto& p : params) {
      if (p.family() != c.family_) throw mixed_family_error();
      if (!p.is_plain()) throw invalid_parameter("candidates are plain atoms; multiplicity is assigned during selection");
    }
    c.params_ = std::move(params);
    c.rule_ = rule;
    return c;
  }

  Family family() const noexcept { return family_; }
  std::size_t size() const noexcept { return params_.size(); }
  const KernelParam& operator[](std::size_t i) const { return params_[i]; }
  const std::vector<KernelParam>& params() const noexcept { return params_; }
  const RepeatRule& repeat_rule() const noexcept { return rule_; }
  bool refinable() const noexcept { return n_first_ > 0; }

  /// Points of the (2 span + 1)^2 stencil around q with spacing / 10^round,
  /// clipped to the candidate box.
  std::vector<KernelParam> refinement_stencil(const KernelParam& q, int round, int span = 5) const {
    if (!refinable()) throw invalid_parameter("candidate set has no grid geometry to refine");
    const double scale = std::pow(10.0, -round);
    const double h1 = d_first_ * scale, h2 = d_second_ * scale;
    std::vector<KernelParam> out;
    out.reserve(static_cast<std::size_t>((2 * span + 1) * (2 * span + 1)));
    for (int a = -span; a <= span; ++a) {
      for (int b = -span; b <= span; ++b) {
        if (family_ == Family::disk) {
          const double r = std::clamp(q.disk().radius() + a * h1, first_lo_, first_hi_);
          out.emplace_back(DiskParam(r, q.disk().angle() + b * h2));
        } else {
          const double ls = std::clamp(std::log(q.heat().time()) + a * h1, first_lo_, first_hi_);
          const double y = std::clamp(q.heat().location() + b * h2, second_lo_, second_hi_);
          out.emplace_back(HeatParam(std::exp(ls), y));
        }
      }
    }
    return out;
  }

 private:
  explicit CandidateSet(Family f) : family_(f), rule_(RepeatRule::exact(f)) {}

  Family family_;
  std::vector<KernelParam> params_;
  RepeatRule rule_;
  int n_first_ = 0, n_second_ = 0;
  double first_lo_ = 0, first_hi_ = 0, second_lo_ = 0, second_hi_ = 0;
  double d_first_ = 0, d_second_ = 0;
};

}  // namespace spoafd
