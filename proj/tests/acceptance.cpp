// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.
//
//   acceptance                     run everything, exit 1 on any failure
//   acceptance --report FILE       run everything, write the lines to FILE, exit 0 once written
//   acceptance --check C7 --report FILE
//                                  exit 0 iff FILE records C7 as passed

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "spoafd.hpp"

using namespace spoafd;
namespace fs = std::filesystem;

namespace tol {
constexpr double ex1_err_n4 = 1e-3;
constexpr double ex1_runtime = 60.0;
constexpr double ex2_err_n15 = 1e-3;
constexpr double ex2_runtime = 180.0;
constexpr double ex3_drop = 5.0;
constexpr double ex3_runtime = 600.0;
constexpr double orthonormality = 1e-8;
constexpr double semigroup_disk = 1e-10;
constexpr double semigroup_heat = 1e-6;
constexpr double reconstruction = 1e-10;
constexpr double ratio_lo = 3.5;
constexpr double ratio_hi = 4.5;
constexpr double attain_disk = 1e-3;
constexpr double attain_heat = 1e-2;
constexpr double spoafd1_slack = 1e-8;
constexpr double bvc_fraction = 0.1;
constexpr int rate_n_max = 100;
}  // namespace tol

namespace {

struct Line {
  std::string id;
  bool pass;
  std::string detail;
};

std::vector<Line> lines;

void record(const std::string& id, bool pass, const std::string& detail) {
  lines.push_back({id, pass, detail});
  std::cout << (pass ? "PASS  " : "FAIL  ") << id << "  " << detail << std::endl;
}

void info(const std::string& id, const std::string& detail) { std::cout << "INFO  " << id << "  " << detail << std::endl; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double max_offdiag(const OrthoSystem& s) {
  const Eigen::MatrixXd g = s.gram();
  return (g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

struct Run {
  ExperimentResult r;
  double seconds = 0.0;
};

Run run(ExampleId id) {
  const auto t0 = std::chrono::steady_clock::now();
  Run out{execute(canonical_config(id)), 0.0};
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "      ran " << to_string(id) << ": " << out.r.system.size() << " atoms in " << fmt("%.1f", out.seconds)
            << " s" << std::endl;
  return out;
}

// Byte content of every output file; meta.json without its wall_seconds entry.
std::map<std::string, std::string> output_bytes(const ExperimentResult& r, const fs::path& dir) {
  fs::remove_all(dir);
  write_outputs(r, dir);
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string s = ss.str();
    if (e.path().filename() == "meta.json") {
      auto j = nlohmann::ordered_json::parse(s);
      j.erase("wall_seconds");
      s = j.dump(2);
    }
    out[e.path().filename().string()] = s;
  }
  return out;
}

int run_all(const std::string& report_path) {
  const Run ex1 = run(ExampleId::laplace_bivariate);
  const Run ex2 = run(ExampleId::heat_bivariate);
  const Run ex3 = run(ExampleId::brownian_bridge);
  const std::vector<const Run*> all = {&ex1, &ex2, &ex3};

  {  // C1
    bool ok = ex1.seconds <= tol::ex1_runtime;
    std::string d;
    for (const auto& re : ex1.r.realizations) {
      const auto& e = re.errors;
      const bool good = e.size() >= 4 && e[3] <= tol::ex1_err_n4 && e[1] > e[2] && e[2] > e[3];
      ok &= good;
      d += re.id + " e2..e4=" + (e.size() >= 4 ? fmt("%.3e", e[1]) + "," + fmt("%.3e", e[2]) + "," + fmt("%.3e", e[3]) : "n/a") + "; ";
    }
    record("C1 Example 1 realization errors", ok, d + "runtime " + fmt("%.1f", ex1.seconds) + " s");
  }
  {  // C2
    bool ok = ex2.seconds <= tol::ex2_runtime;
    std::string d;
    for (const auto& re : ex2.r.realizations) {
      const auto& e = re.errors;
      const bool good = e.size() >= 15 && e[14] <= tol::ex2_err_n15 && e[4] > e[9] && e[9] > e[14];
      ok &= good;
      d += re.id + " e5,e10,e15=" +
           (e.size() >= 15 ? fmt("%.3e", e[4]) + "," + fmt("%.3e", e[9]) + "," + fmt("%.3e", e[14]) : "n/a") + "; ";
    }
    record("C2 Example 2 realization errors", ok, d + "runtime " + fmt("%.1f", ex2.seconds) + " s");
  }
  {  // C3
    const auto& e = ex3.r.expected_error;
    bool mono = true;
    for (std::size_t n = 1; n < e.size(); ++n) mono &= e[n] <= e[n - 1];
    const double drop = e.size() >= 100 ? e[0] / e[99] : 0.0;
    bool ok = mono && drop >= tol::ex3_drop && ex3.seconds <= tol::ex3_runtime && ex3.r.realizations.size() == 2;
    std::string d = std::string("monotone=") + (mono ? "yes" : "no") + " e1/e100=" + fmt("%.2f", drop) + "; ";
    for (const auto& re : ex3.r.realizations) {
      const std::vector<std::size_t> checkpoints = {25, 50, 75, 100, 125};
      bool dec = re.errors.size() >= 125;
      for (std::size_t i = 0; dec && i + 1 < checkpoints.size(); ++i)
        dec = re.errors[checkpoints[i + 1] - 1] < re.errors[checkpoints[i] - 1];
      ok &= dec;
      d += re.id + (dec ? " decreasing" : " not decreasing") + " (e125=" +
           (re.errors.size() >= 125 ? fmt("%.3e", re.errors[124]) : std::string("n/a")) + "); ";
    }
    record("C3 Example 3 Brownian bridge", ok, d + "runtime " + fmt("%.1f", ex3.seconds) + " s");
  }
  {  // C4
    double worst = 0.0;
    for (const Run* x : all) worst = std::max(worst, max_offdiag(x->r.system));
    OrthoSystem disk = make_system(make_circle_grid(2048));
    append(disk, gs_step(disk, KernelParam(DiskParam(0.7, 0.5))));
    for (int i = 0; i < 3; ++i) append(disk, gs_step(disk, KernelParam(DiskParam(0.4, 2.0))));
    OrthoSystem heat = make_system(make_line_grid(24.0, 2048));
    append(heat, gs_step(heat, KernelParam(HeatParam(0.5, 1.0))));
    for (int i = 0; i < 3; ++i) append(heat, gs_step(heat, KernelParam(HeatParam(0.3, -1.0))));
    const bool forced = disk.params.back().order() == 3 && heat.params.back().order() == 3;
    worst = std::max({worst, max_offdiag(disk), max_offdiag(heat)});
    record("C4 Orthonormality", forced && worst <= tol::orthonormality, "max |Gram - I| = " + fmt("%.3e", worst));
  }
  {  // C5
    auto rng = stream_rng(20240601, 5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const BoundaryGrid circle = make_circle_grid(4096), line = make_line_grid(24.0, 4096);
    double disk = 0.0, heat = 0.0;
    for (int i = 0; i < 50; ++i) {
      const KernelParam a(DiskParam(0.95 * u(rng), two_pi * u(rng))), b(DiskParam(0.95 * u(rng), two_pi * u(rng)));
      disk = std::max(disk, std::abs(grid_inner(kernel_on_grid(a, circle), kernel_on_grid(b, circle), circle) - kernel_inner(a, b)));
      const KernelParam c(HeatParam(0.01 + 2.0 * u(rng), -3.0 + 6.0 * u(rng)));
      const KernelParam d(HeatParam(0.01 + 2.0 * u(rng), -3.0 + 6.0 * u(rng)));
      heat = std::max(heat, std::abs(grid_inner(kernel_on_grid(c, line), kernel_on_grid(d, line), line) - kernel_inner(c, d)));
    }
    record("C5 Semigroup oracle equivalence", disk <= tol::semigroup_disk && heat <= tol::semigroup_heat,
           "disk " + fmt("%.3e", disk) + ", heat " + fmt("%.3e", heat));
  }
  {  // C6
    double worst = 0.0;
    for (const Run* x : all)
      for (const auto& re : x->r.realizations) {
        const std::vector<wide> F = wide_coefficients(x->r.wide_system, re.values);
        worst = std::max(worst, reconstruction_gap(F, triangular_coefficients(F, x->r.wide_system), x->r.wide_system));
      }
    record("C6 Triangular reconstruction", std::isfinite(worst) && worst <= tol::reconstruction,
           "max relative gap " + fmt("%.3e", worst));
  }
  {  // C7
    bool ok = true;
    double lo = 1e300, hi = 0.0;
    for (const Run* x : all) {
      const ExperimentConfig& c = x->r.config;
      for (const auto& re : x->r.realizations) {
        const RefinementCheck rc = x->r.grid.family == Family::disk
                                       ? refinement_check(re.field, disk_probes(c.probes, c.seed), c.step)
                                       : refinement_check(re.field, heat_probes(c.probes, c.seed), c.step);
        lo = std::min(lo, rc.ratio);
        hi = std::max(hi, rc.ratio);
        ok &= rc.ratio >= tol::ratio_lo && rc.ratio <= tol::ratio_hi;
      }
    }
    record("C7 PDE residual refinement", ok, "ratios in [" + fmt("%.4f", lo) + ", " + fmt("%.4f", hi) + "]");
  }
  {  // C8 on the bivariate examples; the bridge is reported separately.
    auto gaps = [](const ExperimentResult& r, double level) {
      double worst = 0.0;
      for (const auto& re : r.realizations) {
        const Eigen::VectorXd rec = to_double(wide_reconstruction(wide_coefficients(r.wide_system, re.values), r.wide_system));
        const double gap = boundary_attainment(re.field, rec, r.grid, {level})[0];
        worst = std::max(worst, gap / std::sqrt(re.norm_sq));
      }
      return worst;
    };
    const double d = gaps(ex1.r, 0.999), h = gaps(ex2.r, 1e-4);
    record("C8 Boundary attainment", d <= tol::attain_disk && h <= tol::attain_heat,
           "Example 1 rho=0.999 " + fmt("%.3e", d) + ", Example 2 t=1e-4 " + fmt("%.3e", h));
    info("C8 Brownian bridge paths (not gated)", "rho=0.999 relative gap " + fmt("%.3e", gaps(ex3.r, 0.999)));
  }
  {  // C9
    double worst = -1e300;
    for (const Run* x : {&ex1, &ex2}) {
      const auto& r = x->r;
      const Spoafd1Result s1 = spoafd1_decompose(r.signal, r.grid, *r.candidates, SelectionOptions{1e-12, 30, false});
      const Spoafd1Bounds b = spoafd1_bounds(r.signal, r.grid, s1, 10);
      worst = std::max(worst, b.lhs1 - b.rhs1);
      for (double v : b.rhs2) worst = std::max(worst, b.lhs2 - v);
    }
    record("C9 SPOAFD1 bounds", worst <= tol::spoafd1_slack, "max (lhs - rhs) = " + fmt("%.3e", worst));
  }
  {  // C10
    std::vector<double> radii;
    for (int j = 1; j <= 19; ++j) radii.push_back(0.05 * j);
    radii.push_back(0.99);
    radii.push_back(0.999);
    bool ok = true;
    std::string d;
    for (const Run* x : {&ex1, &ex3}) {
      const auto p = shell_profile(discretize_signal(x->r.signal, x->r.grid), make_system(x->r.grid), disk_shells(radii, 128));
      const double frac = p.back() / *std::max_element(p.begin(), p.end());
      ok &= frac <= tol::bvc_fraction;
      d += std::string(to_string(x->r.config.example)) + " " + fmt("%.3e", frac) + "; ";
    }
    record("C10 Statistical boundary vanishing", ok, "objective(0.999)/max: " + d);
  }
  {  // C11: residual norm sqrt(e_n N) <= M / sqrt(n), M = sqrt(e_1 N).
    bool ok = true;
    std::string d;
    for (const Run* x : all) {
      const auto& e = x->r.expected_error;
      double worst = 0.0;
      std::size_t at = 1;
      for (std::size_t n = 1; n <= e.size() && n <= static_cast<std::size_t>(tol::rate_n_max); ++n) {
        const double v = std::sqrt(n * e[n - 1] / e[0]);
        if (v > worst) worst = v, at = n;
      }
      ok &= worst <= 1.0;
      d += std::string(to_string(x->r.config.example)) + " max sqrt(n e_n / e_1) = " + fmt("%.4f", worst) + " at n=" +
           std::to_string(at) + "; ";
    }
    record("C11 Rate envelope", ok, d);
  }
  {  // C12
    const fs::path root = fs::temp_directory_path() / "spoafd_acceptance";
    bool ok = true;
    std::string d;
    for (const Run* x : all) {
      const auto first = output_bytes(x->r, root / "first");
      const auto second = output_bytes(execute(x->r.config), root / "second");
      const bool same = first == second;
      ok &= same;
      d += std::string(to_string(x->r.config.example)) + (same ? " identical" : " DIFFERS") + " (" +
           std::to_string(first.size()) + " files); ";
    }
    fs::remove_all(root);
    record("C12 Determinism", ok, d);
  }

  bool all_pass = true;
  for (const auto& l : lines) all_pass &= l.pass;
  if (!report_path.empty()) {
    std::ofstream f(report_path);
    for (const auto& l : lines) f << (l.pass ? "PASS " : "FAIL ") << l.id << "  " << l.detail << '\n';
    return f ? 0 : 1;
  }
  return all_pass ? 0 : 1;
}

int check(const std::string& id, const std::string& report_path) {
  std::ifstream f(report_path);
  if (!f) {
    std::cerr << "no report at " << report_path << '\n';
    return 1;
  }
  std::string line;
  while (std::getline(f, line)) {
    std::istringstream ss(line);
    std::string status, name;
    ss >> status >> name;
    if (name == id) {
      std::cout << line << '\n';
      return status == "PASS" ? 0 : 1;
    }
  }
  std::cerr << id << " missing from report\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string report, id;
  app.add_option("--report", report, "Write PASS/FAIL per criterion to this file");
  app.add_option("--check", id, "Read the report and exit with the status of one criterion");
  CLI11_PARSE(app, argc, argv);
  try {
    if (!id.empty()) return check(id, report);
    return run_all(report);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
