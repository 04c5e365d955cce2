// Expands the Example-1 style random boundary data on the disk and
// evaluates the solution of one realization inside.

#include <cmath>
#include <cstdio>

#include "spoafd.hpp"

int main() {
  using namespace spoafd;
  const BoundaryGrid grid = make_circle_grid(1024);
  const CandidateSet cands = CandidateSet::disk_grid(48, 96, 0.99);
  BivariateDensity data{laplace_example_data, make_density_quadrature(DensitySpec::laplace_example(), 101)};

  StochasticExpansion e = spoafd2_decompose(data, grid, cands, SelectionOptions{1e-6, 10, false});
  std::printf("%zu atoms, expected relative error %.3e\n", e.system.size(), e.relative_error_trace.back());

  const Eigen::VectorXd f = density_slice(data, grid, 0.0);
  const std::vector<double>& F = e.realize("X=0", f);
  const SolutionField u = field_from_coefficients(F, e.system, "X=0");
  for (double rho : {0.0, 0.5, 0.9})
    std::printf("u(%.1f, 0) = %.12f\n", rho, u(DiskPoint{rho, 0.0}));
  return 0;
}
