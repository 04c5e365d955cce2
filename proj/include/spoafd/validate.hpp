#pragma once

// Self-check battery run by `spoafd validate`: a reduced Example-1 style
// run plus closed-form identities, each reported as pass/fail.

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "spoafd/candidates.hpp"
#include "spoafd/discretize.hpp"
#include "spoafd/experiment.hpp"
#include "spoafd/kernels.hpp"
#include "spoafd/lift.hpp"
#include "spoafd/poafd.hpp"
#include "spoafd/stochastic.hpp"

namespace spoafd {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double limit = 0.0;
};

struct ValidateOptions {
  std::uint64_t seed = 20240601;
  bool corrupt_gram = false;  // negative control: perturbs gram_A before reconstruction
};

inline std::vector<CheckResult> validate_suite(const ValidateOptions& opt = {}) {
  std::vector<CheckResult> out;
  auto check_le = [&](const std::string& name, double value, double limit) {
    out.push_back({name, std::isfinite(value) && value <= limit, value, limit});
  };

  // Closed-form inner products against quadrature.
  {
    auto rng = stream_rng(opt.seed, 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const BoundaryGrid circle = make_circle_grid(4096);
    const BoundaryGrid line = make_line_grid(24.0, 4096);
    double disk = 0.0, heat = 0.0;
    for (int i = 0; i < 50; ++i) {
      const KernelParam a(DiskParam(0.95 * u(rng), two_pi * u(rng)));
      const KernelParam b(DiskParam(0.95 * u(rng), two_pi * u(rng)));
      disk = std::max(disk, std::abs(grid_inner(kernel_on_grid(a, circle), kernel_on_grid(b, circle), circle) -
                                     kernel_inner(a, b)));
      const KernelParam c(HeatParam(0.01 + 2.0 * u(rng), -3.0 + 6.0 * u(rng)));
      const KernelParam d(HeatParam(0.01 + 2.0 * u(rng), -3.0 + 6.0 * u(rng)));
      heat = std::max(heat, std::abs(grid_inner(kernel_on_grid(c, line), kernel_on_grid(d, line), line) -
                                     kernel_inner(c, d)));
    }
    check_le("semigroup identity (disk)", disk, 1e-10);
    check_le("semigroup identity (heat)", heat, 1e-6);
  }

  // Reduced stochastic run on the disk.
  ExperimentConfig cfg = canonical_config(ExampleId::laplace_bivariate);
  cfg.grid_points = 512;
  cfg.cand_first = 32;
  cfg.cand_second = 64;
  cfg.density_nodes = 101;
  cfg.max_iter = 8;
  cfg.seed = opt.seed;
  ExperimentResult r = execute(cfg);

  const Eigen::MatrixXd gram = r.system.gram();
  check_le("orthonormality", (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(), 1e-8);

  WideSystem ws = r.wide_system;
  if (opt.corrupt_gram && ws.size() > 1) ws.A[1][0] += ws.A[1][1] / 10;
  double recon = 0.0, ratio_dev = 0.0;
  for (const auto& real : r.realizations) {
    const std::vector<wide> F = wide_coefficients(ws, real.values);
    recon = std::max(recon, reconstruction_gap(F, triangular_coefficients(F, ws), ws));
    const RefinementCheck rc = refinement_check(real.field, disk_probes(cfg.probes, cfg.seed), cfg.step);
    ratio_dev = std::max(ratio_dev, std::abs(rc.ratio - 4.0));
  }
  check_le("triangular reconstruction", recon, 1e-10);
  check_le("stencil refinement ratio |ratio - 4|", ratio_dev, 0.5);

  const Spoafd1Result s1 = spoafd1_decompose(r.signal, r.grid, *r.candidates, SelectionOptions{1e-12, 30, false});
  const Spoafd1Bounds b = spoafd1_bounds(r.signal, r.grid, s1, 10);
  double worst = b.lhs1 - b.rhs1;
  for (double v : b.rhs2) worst = std::max(worst, b.lhs2 - v);
  check_le("mean-expansion error bounds", worst, 1e-8);

  bool monotone = true;
  for (std::size_t n = 1; n < r.expected_error.size(); ++n) monotone &= r.expected_error[n] <= r.expected_error[n - 1];
  out.push_back({"expected error nonincreasing", monotone, monotone ? 0.0 : 1.0, 0.0});
  return out;
}

inline bool print_report(const std::vector<CheckResult>& checks, std::ostream& os) {
  bool ok = true;
  for (const auto& c : checks) {
    os << (c.passed ? "PASS  " : "FAIL  ") << c.name << "  value=" << c.value << "  limit=" << c.limit << '\n';
    ok &= c.passed;
  }
  return ok;
}

}  // namespace spoafd
