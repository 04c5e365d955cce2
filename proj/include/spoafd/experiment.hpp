#pragma once

// Experiment configuration and the end-to-end runner behind the CLI.
//
// Config files are INI-style: `[section]` headers and `key = value` lines,
// `#` or `;` comments. The `experiment.example` key picks a canonical
// configuration; every other key overrides one of its fields.

#include <Eigen/Core>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spoafd/candidates.hpp"
#include "spoafd/discretize.hpp"
#include "spoafd/errors.hpp"
#include "spoafd/kernels.hpp"
#include "spoafd/lift.hpp"
#include "spoafd/poafd.hpp"
#include "spoafd/stochastic.hpp"

#ifndef SPOAFD_VERSION
#define SPOAFD_VERSION "1.0.0-unknown"
#endif

namespace spoafd {

enum class ExampleId { laplace_bivariate, heat_bivariate, brownian_bridge, custom };
enum class SelectionMode { spoafd1, spoafd2 };
enum class SignalMode { density, covariance, paths };

inline const char* to_string(ExampleId e) {
  switch (e) {
    case ExampleId::laplace_bivariate: return "laplace_bivariate";
    case ExampleId::heat_bivariate: return "heat_bivariate";
    case ExampleId::brownian_bridge: return "brownian_bridge";
    default: return "custom";
  }
}
inline const char* to_string(SelectionMode s) { return s == SelectionMode::spoafd1 ? "spoafd1" : "spoafd2"; }
inline const char* to_string(SignalMode s) {
  switch (s) {
    case SignalMode::density: return "density";
    case SignalMode::covariance: return "covariance";
    default: return "paths";
  }
}

/// Accepts the names above and the shorthands 1, 2, 3.
inline std::optional<ExampleId> parse_example_id(const std::string& s) {
  if (s == "laplace_bivariate" || s == "1") return ExampleId::laplace_bivariate;
  if (s == "heat_bivariate" || s == "2") return ExampleId::heat_bivariate;
  if (s == "brownian_bridge" || s == "3") return ExampleId::brownian_bridge;
  if (s == "custom") return ExampleId::custom;
  return std::nullopt;
}

struct ExperimentConfig {
  ExampleId example = ExampleId::custom;
  Family family = Family::disk;
  SelectionMode selection = SelectionMode::spoafd2;
  SignalMode signal = SignalMode::density;
  double tol = 1e-4;
  int max_iter = 100;
  std::uint64_t seed = 20240601;
  std::string output = "out";

  int grid_points = 2048;    // M on the circle, N on the line
  double half_width = 24.0;  // line truncation L

  int cand_first = 64;   // radii, or times
  int cand_second = 128; // angles, or locations
  double r_max = 0.99;
  double s_min = 1e-3;
  double s_max = 20.0;
  double y_half_width = 24.0;
  bool refine = false;

  int density_nodes = 201;  // Simpson nodes per density piece
  int signal_paths = 2000;  // sample count in paths mode
  std::string paths_file;   // custom data: one path per CSV row

  std::vector<double> realization_values;  // X values (bivariate examples)
  int realization_paths = 0;               // sampled or file paths to report

  int probes = 200;
  double step = 1e-3;
  int lattice_first = 100;   // radii in [0, 0.99], or times in [0.05, 2]
  int lattice_second = 256;  // angles, or x values in [-12, 12]
};

/// Canonical configuration of each example.
inline ExperimentConfig canonical_config(ExampleId id) {
  ExperimentConfig c;
  c.example = id;
  switch (id) {
    case ExampleId::laplace_bivariate:
      c.family = Family::disk;
      c.signal = SignalMode::density;
      c.tol = 1e-6;
      c.max_iter = 12;
      c.grid_points = 2048;
      c.cand_first = 64;
      c.cand_second = 128;
      c.density_nodes = 201;
      c.realization_values = {0.0, -std::numbers::pi, 2.4504};
      c.output = "laplace_bivariate";
      break;
    case ExampleId::heat_bivariate:
      c.family = Family::heat;
      c.signal = SignalMode::density;
      c.tol = 1e-7;
      c.max_iter = 40;
      c.grid_points = 2048;
      c.half_width = 24.0;
      c.cand_first = 48;
      c.cand_second = 129;
      c.s_min = 1e-3;
      c.s_max = 20.0;
      c.y_half_width = 24.0;
      c.density_nodes = 401;
      c.realization_values = {0.0, -3.7, 3.1};
      c.lattice_first = 40;
      c.lattice_second = 241;
      c.output = "heat_bivariate";
      break;
    case ExampleId::brownian_bridge:
      c.family = Family::disk;
      c.signal = SignalMode::covariance;
      c.tol = 1e-4;
      c.max_iter = 130;
      c.grid_points = 1024;
      c.cand_first = 64;
      c.cand_second = 128;
      c.realization_paths = 2;
      c.output = "brownian_bridge";
      break;
    case ExampleId::custom:
      c.signal = SignalMode::paths;
      c.output = "custom";
      break;
  }
  return c;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  const char* section;
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

[[noreturn]] inline void bad_value(const std::string& what, const std::string& v) {
  throw config_error("expected " + what + ", got '" + v + "'");
}

inline double to_double(const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || !std::isfinite(d)) bad_value("a finite number", v);
  return d;
}

inline long long to_integer(const std::string& v) {
  char* end = nullptr;
  const long long i = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0') bad_value("an integer", v);
  return i;
}

inline int to_int(const std::string& v) {
  const long long i = to_integer(v);
  if (i < -2147483647LL || i > 2147483647LL) bad_value("a 32-bit integer", v);
  return static_cast<int>(i);
}

inline bool to_bool(const std::string& v) {
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  bad_value("a boolean", v);
}

inline std::vector<double> to_list(const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item == "pi") out.push_back(std::numbers::pi);
    else if (item == "-pi") out.push_back(-std::numbers::pi);
    else if (!item.empty()) out.push_back(to_double(item));
  }
  return out;
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(v[i]);
  return s;
}

inline const std::vector<Field>& config_fields() {
  using C = ExperimentConfig;
  auto dbl = [](double C::*m) {
    return std::pair{std::function<void(C&, const std::string&)>([m](C& c, const std::string& v) { c.*m = to_double(v); }),
                     std::function<std::string(const C&)>([m](const C& c) { return format_double(c.*m); })};
  };
  auto integer = [](int C::*m) {
    return std::pair{std::function<void(C&, const std::string&)>([m](C& c, const std::string& v) { c.*m = to_int(v); }),
                     std::function<std::string(const C&)>([m](const C& c) { return std::to_string(c.*m); })};
  };
  auto make = [](const char* s, const char* k, auto p) { return Field{s, k, p.first, p.second}; };
  static const std::vector<Field> fields = {
      {"experiment", "example", [](C& c, const std::string& v) {
         auto e = parse_example_id(v);
         if (!e) bad_value("laplace_bivariate|heat_bivariate|brownian_bridge|custom", v);
         c.example = *e;
       }, [](const C& c) { return std::string(to_string(c.example)); }},
      {"experiment", "family", [](C& c, const std::string& v) {
         if (v == "disk") c.family = Family::disk;
         else if (v == "heat") c.family = Family::heat;
         else bad_value("disk|heat", v);
       }, [](const C& c) { return std::string(to_string(c.family)); }},
      {"experiment", "selection", [](C& c, const std::string& v) {
         if (v == "spoafd1") c.selection = SelectionMode::spoafd1;
         else if (v == "spoafd2") c.selection = SelectionMode::spoafd2;
         else bad_value("spoafd1|spoafd2", v);
       }, [](const C& c) { return std::string(to_string(c.selection)); }},
      {"experiment", "signal", [](C& c, const std::string& v) {
         if (v == "density") c.signal = SignalMode::density;
         else if (v == "covariance") c.signal = SignalMode::covariance;
         else if (v == "paths") c.signal = SignalMode::paths;
         else bad_value("density|covariance|paths", v);
       }, [](const C& c) { return std::string(to_string(c.signal)); }},
      make("experiment", "tol", dbl(&C::tol)),
      make("experiment", "max_iter", integer(&C::max_iter)),
      {"experiment", "seed", [](C& c, const std::string& v) {
         char* end = nullptr;
         const unsigned long long s = std::strtoull(v.c_str(), &end, 10);
         if (v.empty() || *end != '\0' || v[0] == '-') bad_value("an unsigned 64-bit integer", v);
         c.seed = s;
       }, [](const C& c) { return std::to_string(c.seed); }},
      {"experiment", "output", [](C& c, const std::string& v) { c.output = v; }, [](const C& c) { return c.output; }},
      make("grid", "points", integer(&C::grid_points)),
      make("grid", "half_width", dbl(&C::half_width)),
      make("candidates", "first", integer(&C::cand_first)),
      make("candidates", "second", integer(&C::cand_second)),
      make("candidates", "r_max", dbl(&C::r_max)),
      make("candidates", "s_min", dbl(&C::s_min)),
      make("candidates", "s_max", dbl(&C::s_max)),
      make("candidates", "y_half_width", dbl(&C::y_half_width)),
      {"candidates", "refine", [](C& c, const std::string& v) { c.refine = to_bool(v); },
       [](const C& c) { return std::string(c.refine ? "true" : "false"); }},
      make("signal", "density_nodes", integer(&C::density_nodes)),
      make("signal", "paths", integer(&C::signal_paths)),
      {"signal", "paths_file", [](C& c, const std::string& v) { c.paths_file = v; }, [](const C& c) { return c.paths_file; }},
      {"realizations", "values", [](C& c, const std::string& v) { c.realization_values = to_list(v); },
       [](const C& c) { return join(c.realization_values); }},
      make("realizations", "paths", integer(&C::realization_paths)),
      make("lift", "probes", integer(&C::probes)),
      make("lift", "step", dbl(&C::step)),
      make("lift", "lattice_first", integer(&C::lattice_first)),
      make("lift", "lattice_second", integer(&C::lattice_second)),
  };
  return fields;
}

}  // namespace detail

/// Throws config_error naming the offending field.
inline void validate_config(const ExperimentConfig& c) {
  auto fail = [](const std::string& field, const std::string& why) { throw config_error(field + ": " + why); };
  if (!(c.tol > 0.0)) fail("experiment.tol", "must be positive");
  if (c.max_iter < 1) fail("experiment.max_iter", "must be >= 1");
  if (c.output.empty()) fail("experiment.output", "must be nonempty");
  if (c.family == Family::disk && c.grid_points < 16) fail("grid.points", "circle grids need at least 16 nodes");
  if (c.family == Family::heat && c.grid_points < 64) fail("grid.points", "line grids need at least 64 nodes");
  if (c.family == Family::heat && !(c.half_width > 0.0)) fail("grid.half_width", "must be positive");
  if (c.cand_first < 2 || c.cand_second < 2) fail("candidates", "need at least 2 values per axis");
  if (c.family == Family::disk && !(c.r_max > 0.0 && c.r_max < 1.0)) fail("candidates.r_max", "must lie in (0, 1)");
  if (c.family == Family::heat && !(c.s_min > 0.0 && c.s_max > c.s_min)) fail("candidates.s_min", "need 0 < s_min < s_max");
  if (c.family == Family::heat && !(c.y_half_width > 0.0)) fail("candidates.y_half_width", "must be positive");
  if (c.density_nodes < 3 || c.density_nodes % 2 == 0) fail("signal.density_nodes", "must be odd and >= 3");
  if (c.signal == SignalMode::paths && c.example != ExampleId::custom && c.signal_paths < 2)
    fail("signal.paths", "paths mode needs at least 2 sample paths");
  if (c.probes < 1) fail("lift.probes", "must be >= 1");
  if (!(c.step > 0.0 && c.step <= 0.05)) fail("lift.step", "must lie in (0, 0.05]");
  if (c.lattice_first < 2 || c.lattice_second < 2) fail("lift.lattice", "need at least 2 values per axis");
  switch (c.example) {
    case ExampleId::laplace_bivariate:
    case ExampleId::brownian_bridge:
      if (c.family != Family::disk) fail("experiment.family", std::string(to_string(c.example)) + " lives on the disk");
      break;
    case ExampleId::heat_bivariate:
      if (c.family != Family::heat) fail("experiment.family", "heat_bivariate lives on the line");
      break;
    case ExampleId::custom:
      if (c.signal != SignalMode::paths) fail("experiment.signal", "custom data is given as sample paths");
      if (c.paths_file.empty()) fail("signal.paths_file", "custom experiments need a paths file");
      break;
  }
  if (c.example == ExampleId::brownian_bridge) {
    if (c.signal == SignalMode::density) fail("experiment.signal", "the Brownian bridge has no density form");
    if (c.realization_paths < 1) fail("realizations.paths", "need at least one sample path to report");
  } else if (c.example != ExampleId::custom && c.realization_values.empty()) {
    fail("realizations.values", "list at least one realization");
  }
}

/// Parses INI text; diagnostics carry `source:line`.
inline ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>") {
  struct Entry {
    std::string value;
    int line;
  };
  std::vector<std::pair<std::string, Entry>> entries;
  std::map<std::string, int> seen;
  std::string section, raw;
  int lineno = 0;
  auto where = [&](int l) { return source + ":" + std::to_string(l) + ": "; };
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = detail::trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw config_error(where(lineno) + "unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw config_error(where(lineno) + "expected 'key = value'");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = line.substr(eq + 1);
    for (const char* c : {" #", " ;", "\t#", "\t;"})
      if (auto p = value.find(c); p != std::string::npos) value = value.substr(0, p);
    value = detail::trim(value);
    const std::string full = section + "." + key;
    if (section.empty()) throw config_error(where(lineno) + "key '" + key + "' outside any section");
    if (auto it = seen.find(full); it != seen.end())
      throw config_error(where(lineno) + "field '" + full + "' repeats line " + std::to_string(it->second));
    seen[full] = lineno;
    entries.push_back({full, {value, lineno}});
  }
  ExperimentConfig cfg;
  if (auto it = seen.find("experiment.example"); it != seen.end()) {
    for (const auto& [k, e] : entries)
      if (k == "experiment.example") {
        const auto id = parse_example_id(e.value);
        if (!id) throw config_error(where(e.line) + "field 'experiment.example': unknown example '" + e.value + "'");
        cfg = canonical_config(*id);
      }
  } else {
    throw config_error(source + ": missing field 'experiment.example'");
  }
  for (const auto& [k, e] : entries) {
    const detail::Field* field = nullptr;
    for (const auto& f : detail::config_fields())
      if (k == std::string(f.section) + "." + f.key) field = &f;
    if (!field) throw config_error(where(e.line) + "unknown field '" + k + "'");
    try {
      field->set(cfg, e.value);
    } catch (const config_error& err) {
      throw config_error(where(e.line) + "field '" + k + "': " + err.what());
    }
  }
  try {
    validate_config(cfg);
  } catch (const config_error& err) {
    throw config_error(source + ": " + err.what());
  }
  return cfg;
}

inline ExperimentConfig parse_config_string(const std::string& text, const std::string& source = "<string>") {
  std::istringstream in(text);
  return parse_config(in, source);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file '" + path.string() + "'");
  return parse_config(in, path.string());
}

/// Writes every field, grouped by section.
inline std::string to_ini(const ExperimentConfig& c) {
  std::string out, section;
  for (const auto& f : detail::config_fields()) {
    if (section != f.section) {
      section = f.section;
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
    }
    out += std::string(f.key) + " = " + f.get(c) + "\n";
  }
  return out;
}

inline nlohmann::ordered_json config_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  for (const auto& f : detail::config_fields()) j[f.section][f.key] = f.get(c);
  return j;
}

// ---------------------------------------------------------------------------
// Running

/// Boundary data of the bivariate examples.
inline double laplace_example_data(double t, double x) {
  const double d = std::sin(t) - x;
  return 1.0 / std::sqrt(5.0 + d * d);
}
inline double heat_example_data(double y, double x) {
  const double d = y / 3.0 - x;
  return 1.0 / (2.0 + d * d);
}

struct RealizationResult {
  std::string id;
  Eigen::VectorXd values;
  double norm_sq = 0.0;
  std::vector<double> coeffs;  // F_n
  std::vector<double> errors;  // relative error per n
  SolutionField field;
};

struct ExperimentResult {
  ExperimentConfig config;
  BoundaryGrid grid;
  std::optional<CandidateSet> candidates;
  StochasticSignal signal;
  OrthoSystem system;
  WideSystem wide_system;  // the same atoms in quad precision, for the lift
  std::vector<double> expected_error;
  double N_norm_sq = 0.0;
  SelectionAudit audit;
  bool converged = false;
  std::optional<Spoafd1Result> spoafd1;
  std::vector<RealizationResult> realizations;
  double wall_seconds = 0.0;

  int exit_code() const { return converged ? 0 : 2; }
};

inline BoundaryGrid experiment_grid(const ExperimentConfig& c) {
  return c.family == Family::disk ? make_circle_grid(c.grid_points) : make_line_grid(c.half_width, c.grid_points);
}

inline CandidateSet experiment_candidates(const ExperimentConfig& c) {
  return c.family == Family::disk ? CandidateSet::disk_grid(c.cand_first, c.cand_second, c.r_max)
                                  : CandidateSet::heat_grid(c.cand_first, c.cand_second, c.s_min, c.s_max, c.y_half_width);
}

inline Eigen::MatrixXd read_paths_csv(const std::string& path, Eigen::Index columns) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open paths file '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(detail::to_double(detail::trim(cell)));
      } catch (const config_error& e) {
        throw config_error(path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    if (static_cast<Eigen::Index>(row.size()) != columns)
      throw config_error(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(columns) + " values");
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), columns);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Eigen::Index j = 0; j < columns; ++j) m(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  return m;
}

/// Signal in the configured mode plus the realizations to report.
inline std::pair<StochasticSignal, std::vector<RealizationResult>> build_signal(const ExperimentConfig& c,
                                                                                 const BoundaryGrid& grid) {
  std::vector<RealizationResult> reals;
  if (c.example == ExampleId::laplace_bivariate || c.example == ExampleId::heat_bivariate) {
    const bool laplace = c.example == ExampleId::laplace_bivariate;
    const DensitySpec spec = laplace ? DensitySpec::laplace_example() : DensitySpec::standard_normal(8.0);
    const std::function<double(double, double)> f = laplace ? laplace_example_data : heat_example_data;
    BivariateDensity d{f, make_density_quadrature(spec, c.density_nodes)};
    for (double x : c.realization_values) {
      char id[48];
      std::snprintf(id, sizeof id, "X=%.6g", x);
      reals.push_back({id, density_slice(d, grid, x), 0.0, {}, {}, {}});
    }
    if (c.signal == SignalMode::density) return {StochasticSignal{d}, std::move(reals)};
    if (c.signal == SignalMode::covariance) {
      const WeightedSlices s = discretize_signal(d, grid);
      const Eigen::VectorXd mean = s.values * s.weights;
      const Eigen::MatrixXd dev = (s.values.colwise() - mean) * s.weights.cwiseSqrt().asDiagonal();
      return {CovarianceProcess{mean, dev * dev.transpose()}, std::move(reals)};
    }
    const std::vector<double> xs = sample_from_density(spec, static_cast<std::size_t>(c.signal_paths), c.seed);
    Eigen::MatrixXd paths(static_cast<Eigen::Index>(xs.size()), grid.size());
    for (std::size_t i = 0; i < xs.size(); ++i) paths.row(static_cast<Eigen::Index>(i)) = density_slice(d, grid, xs[i]).transpose();
    return {SamplePaths{paths, c.seed}, std::move(reals)};
  }
  if (c.example == ExampleId::brownian_bridge) {
    auto zero = [](double) { return 0.0; };
    const Eigen::MatrixXd shown =
        sample_paths_from_covariance(zero, brownian_bridge_covariance, grid, c.realization_paths, c.seed);
    for (Eigen::Index i = 0; i < shown.rows(); ++i)
      reals.push_back({"path_" + std::to_string(i + 1), shown.row(i).transpose(), 0.0, {}, {}, {}});
    if (c.signal == SignalMode::covariance) {
      Eigen::MatrixXd cov(grid.size(), grid.size());
      for (Eigen::Index i = 0; i < grid.size(); ++i)
        for (Eigen::Index j = 0; j < grid.size(); ++j) cov(i, j) = brownian_bridge_covariance(grid.nodes[i], grid.nodes[j]);
      return {CovarianceProcess{Eigen::VectorXd::Zero(grid.size()), cov}, std::move(reals)};
    }
    const Eigen::MatrixXd paths =
        sample_paths_from_covariance(zero, brownian_bridge_covariance, grid, c.signal_paths, splitmix64(c.seed));
    return {SamplePaths{paths, splitmix64(c.seed)}, std::move(reals)};
  }
  const Eigen::MatrixXd paths = read_paths_csv(c.paths_file, grid.size());
  if (paths.rows() < 2) throw config_error(c.paths_file + ": need at least two sample paths");
  const Eigen::Index shown = std::min<Eigen::Index>(c.realization_paths, paths.rows());
  for (Eigen::Index i = 0; i < shown; ++i)
    reals.push_back({"path_" + std::to_string(i + 1), paths.row(i).transpose(), 0.0, {}, {}, {}});
  return {SamplePaths{paths, 0}, std::move(reals)};
}

/// Runs the experiment in memory.
inline ExperimentResult execute(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult r;
  r.config = cfg;
  r.grid = experiment_grid(cfg);
  r.candidates = experiment_candidates(cfg);
  auto [signal, reals] = build_signal(cfg, r.grid);
  r.signal = std::move(signal);
  r.realizations = std::move(reals);
  SelectionOptions opt{cfg.tol, cfg.max_iter, cfg.refine};

  if (cfg.selection == SelectionMode::spoafd2) {
    StochasticExpansion e = spoafd2_decompose(r.signal, r.grid, *r.candidates, opt);
    r.system = std::move(e.system);
    r.expected_error = std::move(e.relative_error_trace);
    r.N_norm_sq = e.N_norm_sq;
    r.audit = std::move(e.audit);
    r.converged = e.converged;
  } else {
    Spoafd1Result s = spoafd1_decompose(r.signal, r.grid, *r.candidates, opt);
    r.system = s.mean_expansion.system;
    r.audit = s.mean_expansion.audit;
    r.converged = s.mean_expansion.converged;
    const WeightedSlices sl = discretize_signal(r.signal, r.grid);
    const Eigen::MatrixXd sw = r.grid.weights.asDiagonal() * sl.values;
    r.N_norm_sq = (sl.weights.array() * (sl.values.array() * sw.array()).colwise().sum().transpose()).sum();
    double captured = 0.0;
    for (const auto& e : r.system.E) {
      const Eigen::VectorXd c = sw.transpose() * e;
      captured += (sl.weights.array() * c.array().square()).sum();
      r.expected_error.push_back((r.N_norm_sq - captured) / r.N_norm_sq);
    }
    r.spoafd1 = std::move(s);
  }

  r.wide_system = make_wide_system(r.system);
  for (auto& real : r.realizations) {
    real.norm_sq = grid_norm_sq(real.values, r.grid);
    real.coeffs = realize_coeffs(r.system, real.values);
    real.errors = partial_sum_errors(real.coeffs, real.norm_sq);
    real.field = field_from_realization(real.values, r.wide_system, real.id);
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

namespace detail {

inline std::string sci(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

inline std::string file_safe(std::string s) {
  for (char& ch : s)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '.' || ch == '_')) ch = '_';
  return s;
}

}  // namespace detail

/// Directory the outputs go to: SPOAFD_OUTPUT_ROOT (if set) joined with
/// the configured output path, unless that path is absolute.
inline std::filesystem::path output_directory(const ExperimentConfig& c) {
  std::filesystem::path out(c.output);
  if (out.is_absolute()) return out;
  if (const char* root = std::getenv("SPOAFD_OUTPUT_ROOT"); root && *root) return std::filesystem::path(root) / out;
  return out;
}

/// Writes errors.csv, atoms.csv, field_<id>.csv and meta.json.
inline void write_outputs(const ExperimentResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(dir / name);
    if (!f) throw error("cannot write " + (dir / name).string());
    return f;
  };
  {
    std::ofstream f = open("errors.csv");
    f << "n,expected_relative_error";
    for (const auto& real : r.realizations) f << ',' << real.id;
    f << '\n';
    for (std::size_t n = 0; n < r.expected_error.size(); ++n) {
      f << n + 1 << ',' << detail::sci(r.expected_error[n]);
      for (const auto& real : r.realizations) f << ',' << detail::sci(real.errors[n]);
      f << '\n';
    }
  }
  {
    std::ofstream f = open("atoms.csv");
    const bool disk = r.grid.family == Family::disk;
    f << "k," << (disk ? "radius,angle" : "time,location") << ",order,objective,refined,gram_diagonal\n";
    for (std::size_t k = 0; k < r.system.size(); ++k) {
      const auto& q = r.system.params[k];
      f << k + 1 << ',' << detail::sci(q.first()) << ',' << detail::sci(q.second()) << ',' << q.order() << ','
        << detail::sci(r.audit.objective[k]) << ',' << (r.audit.refined[k] ? 1 : 0) << ','
        << detail::sci(r.system.gram_A(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k))) << '\n';
    }
  }
  const int n1 = r.config.lattice_first, n2 = r.config.lattice_second;
  for (const auto& real : r.realizations) {
    std::ofstream f = open("field_" + detail::file_safe(real.id) + ".csv");
    if (r.grid.family == Family::disk) {
      f << "rho,theta,x,y,u\n";
      for (int i = 0; i < n1; ++i) {
        const double rho = 0.99 * i / (n1 - 1);
        for (int k = 0; k < n2; ++k) {
          const double th = two_pi * k / n2;
          f << detail::sci(rho) << ',' << detail::sci(th) << ',' << detail::sci(rho * std::cos(th)) << ','
            << detail::sci(rho * std::sin(th)) << ',' << detail::sci(real.field(DiskPoint{rho, th})) << '\n';
        }
      }
    } else {
      f << "t,x,u\n";
      for (int i = 0; i < n1; ++i) {
        const double t = 0.05 + (2.0 - 0.05) * i / (n1 - 1);
        for (int k = 0; k < n2; ++k) {
          const double x = -12.0 + 24.0 * k / (n2 - 1);
          f << detail::sci(t) << ',' << detail::sci(x) << ',' << detail::sci(real.field(HeatPoint{t, x})) << '\n';
        }
      }
    }
  }
  nlohmann::ordered_json meta;
  meta["version"] = SPOAFD_VERSION;
  meta["config"] = config_json(r.config);
  meta["seed"] = r.config.seed;
  meta["selection_mode"] = to_string(r.config.selection);
  meta["signal_mode"] = to_string(r.config.signal);
  meta["candidate_search"] = r.config.refine ? "grid+refine" : "grid";
  meta["candidate_count"] = r.candidates ? r.candidates->size() : 0;
  meta["grid"] = {{"family", r.grid.family == Family::disk ? "circle" : "line"},
                  {"points", r.grid.size()},
                  {"half_width", r.grid.half_width}};
  meta["lattice"] = r.grid.family == Family::disk
                        ? nlohmann::ordered_json{{"rho", {0.0, 0.99, n1}}, {"theta", {0.0, two_pi, n2}}}
                        : nlohmann::ordered_json{{"t", {0.05, 2.0, n1}}, {"x", {-12.0, 12.0, n2}}};
  meta["atoms"] = r.system.size();
  meta["converged"] = r.converged;
  meta["exit_code"] = r.exit_code();
  meta["expected_norm_sq"] = r.N_norm_sq;
  meta["final_expected_relative_error"] = r.expected_error.empty() ? 1.0 : r.expected_error.back();
  meta["realizations"] = nlohmann::ordered_json::array();
  for (const auto& real : r.realizations) meta["realizations"].push_back({{"id", real.id}, {"norm_sq", real.norm_sq}});
  meta["wall_seconds"] = r.wall_seconds;
  std::ofstream f = open("meta.json");
  f << meta.dump(2) << '\n';
}

/// Runs and writes outputs; returns 0 on convergence, 2 if max_iter was hit.
inline int run_experiment(const ExperimentConfig& cfg) {
  const ExperimentResult r = execute(cfg);
  write_outputs(r, output_directory(cfg));
  return r.exit_code();
}

}  // namespace spoafd
