// Command-line front end: run a config, run a canonical example, or self-check.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "spoafd.hpp"

namespace {

int report_run(const spoafd::ExperimentConfig& cfg) {
  const spoafd::ExperimentResult r = spoafd::execute(cfg);
  const auto dir = spoafd::output_directory(cfg);
  spoafd::write_outputs(r, dir);
  std::cout << spoafd::to_string(cfg.example) << ": " << r.system.size() << " atoms, expected relative error "
            << (r.expected_error.empty() ? 1.0 : r.expected_error.back()) << (r.converged ? "" : " (max_iter reached)")
            << ", outputs in " << dir.string() << '\n';
  return r.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse kernel expansions for the Dirichlet and heat problems with random data"};
  app.set_version_flag("--version", SPOAFD_VERSION);
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_path, "INI config file")->required();

  std::string example;
  auto* demo = app.add_subcommand("demo", "Write the canonical config of an example and run it");
  demo->add_option("example", example, "laplace_bivariate | heat_bivariate | brownian_bridge (or 1, 2, 3)")->required();

  std::uint64_t seed = 20240601;
  bool corrupt = false;
  auto* validate = app.add_subcommand("validate", "Run the invariant battery");
  validate->add_option("--seed", seed, "Seed for randomized checks");
  validate->add_flag("--corrupt-gram", corrupt, "Perturb the Gram-Schmidt matrix (negative control)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) return report_run(spoafd::load_config(config_path));
    if (*demo) {
      const auto id = spoafd::parse_example_id(example);
      if (!id || *id == spoafd::ExampleId::custom) {
        std::cerr << "error: unknown example '" << example << "'\n";
        return 1;
      }
      const spoafd::ExperimentConfig cfg = spoafd::canonical_config(*id);
      const auto dir = spoafd::output_directory(cfg);
      std::filesystem::create_directories(dir);
      std::ofstream(dir / "config.ini") << spoafd::to_ini(cfg);
      return report_run(cfg);
    }
    const bool ok = spoafd::print_report(spoafd::validate_suite({seed, corrupt}), std::cout);
    return ok ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
