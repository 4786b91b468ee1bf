#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "kinkclusters/errors.hpp"
#include "kinkclusters/potential.hpp"

namespace kinkclusters {

// One experiment per file, INI sections of key = value pairs.  The full
// schema, with defaults, is in configs/README.md.
struct ExperimentConfig {
  // [experiment]
  std::string kind = "kink";
  std::string model = "phi4";  // phi4 | sine_gordon | table:<path>
  std::size_t n = 2;
  std::uint64_t seed = 1;

  // [grid]
  double dx = 0.05;
  double half_width = 0.0;  // 0: sized from the run length
  double courant = 0.8;
  double sample_interval = 0.2;
  bool quasi_static = true;

  // [kink]
  double x_max = 15.0;
  std::size_t n_points = 4096;

  // [forces]
  std::vector<double> force_gaps{8, 10, 12, 14};
  double force_velocity = 0.0;

  // [toda]
  double toda_t0 = 10.0;
  double toda_t_final = 1e4;
  double toda_delta = 1e-2;
  double toda_t_far = 1e6;
  std::size_t toda_trials = 4;

  // [evolve]
  std::vector<double> evolve_gaps{12};
  std::vector<double> evolve_velocities;  // empty: at rest
  double evolve_t_final = 50.0;

  // [launch]  (verify and sweep)
  double launch_gap = 12.0;
  double t_launch = 0.0;  // 0: from launch_gap via the explicit law
  double t_run = 0.0;     // 0: up to the safe-window limit
  bool reverse = false;

  // [cluster]
  std::vector<double> cluster_y0{12};
  double horizon = 40.0;
  int budget = 40;
  double tol_map = 0.01;

  // [sweep]
  std::string sweep_target = "toda";  // toda | launch
  std::vector<double> sweep_gaps{10, 11, 12};

  // [output]
  std::string csv, json;

  boost::property_tree::ptree raw;  // as read, for the summary echo

  Potential potential() const {
    if (model.rfind("table:", 0) == 0) return load_tabulated(model.substr(6));
    return builtin(model);
  }

  void validate() const {
    static const std::set<std::string> kinds{"kink",    "forces", "toda", "evolve",
                                             "cluster", "verify", "sweep"};
    if (!kinds.count(kind)) throw ConfigError("unknown experiment kind '" + kind + "'");
    if (n < 1) throw ConfigError("n must be >= 1");
    if (!(dx > 0)) throw ConfigError("grid.dx must be positive");
    if (!(courant > 0 && courant <= 0.85)) throw ConfigError("grid.courant must be in (0, 0.85]");
    if (!(sample_interval >= courant * dx)) {
      throw ConfigError("grid.sample_interval shorter than the time step");
    }
    if (sweep_target != "toda" && sweep_target != "launch") {
      throw ConfigError("sweep.target must be toda or launch");
    }
    for (const std::string* path : {&csv, &json}) {
      if (path->empty()) continue;
      const auto parent = std::filesystem::absolute(*path).parent_path();
      if (!std::filesystem::is_directory(parent)) {
        throw ConfigError("output directory does not exist: " + parent.string());
      }
      std::ofstream probe(*path, std::ios::app);
      if (!probe) throw ConfigError("output file is not writable: " + *path);
    }
  }
};

namespace detail {

inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item.substr(b), &used));
    } catch (const std::exception&) {
      throw ConfigError("bad number in " + key + ": '" + item + "'");
    }
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("bad boolean in " + key + ": '" + v + "'");
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (v.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("bad number in " + key + ": '" + v + "'");
  }
}

}  // namespace detail

// Applies one "section.key = value" setting.  Unknown keys are errors, so
// typos do not silently fall back to defaults.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& v) {
  using namespace detail;
  auto num = [&] { return parse_double(key, v); };
  auto count = [&] {
    const double d = num();
    if (d < 0 || d != std::floor(d)) throw ConfigError(key + " must be a non-negative integer");
    return static_cast<std::size_t>(d);
  };
  if (key == "experiment.kind") c.kind = v;
  else if (key == "experiment.model") c.model = v;
  else if (key == "experiment.n") c.n = count();
  else if (key == "experiment.seed") c.seed = count();
  else if (key == "grid.dx") c.dx = num();
  else if (key == "grid.half_width") c.half_width = num();
  else if (key == "grid.courant") c.courant = num();
  else if (key == "grid.sample_interval") c.sample_interval = num();
  else if (key == "grid.quasi_static") c.quasi_static = parse_bool(key, v);
  else if (key == "kink.x_max") c.x_max = num();
  else if (key == "kink.n_points") c.n_points = count();
  else if (key == "forces.gaps") c.force_gaps = parse_list(key, v);
  else if (key == "forces.velocity") c.force_velocity = num();
  else if (key == "toda.t0") c.toda_t0 = num();
  else if (key == "toda.t_final") c.toda_t_final = num();
  else if (key == "toda.delta") c.toda_delta = num();
  else if (key == "toda.t_far") c.toda_t_far = num();
  else if (key == "toda.trials") c.toda_trials = count();
  else if (key == "evolve.gaps") c.evolve_gaps = parse_list(key, v);
  else if (key == "evolve.velocities") c.evolve_velocities = parse_list(key, v);
  else if (key == "evolve.t_final") c.evolve_t_final = num();
  else if (key == "launch.gap") c.launch_gap = num();
  else if (key == "launch.t_launch") c.t_launch = num();
  else if (key == "launch.t_run") c.t_run = num();
  else if (key == "launch.reverse") c.reverse = parse_bool(key, v);
  else if (key == "cluster.y0") c.cluster_y0 = parse_list(key, v);
  else if (key == "cluster.horizon") c.horizon = num();
  else if (key == "cluster.budget") c.budget = int(count());
  else if (key == "cluster.tol_map") c.tol_map = num();
  else if (key == "sweep.target") c.sweep_target = v;
  else if (key == "sweep.gaps") c.sweep_gaps = parse_list(key, v);
  else if (key == "output.csv") c.csv = v;
  else if (key == "output.json") c.json = v;
  else throw ConfigError("unknown config key '" + key + "'");
  c.raw.put(boost::property_tree::ptree::path_type(key, '.'), v);
}

inline ExperimentConfig parse_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  ExperimentConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      std::string v = value.data();
      // Inline comments after ';' or '#'.
      const auto cut = v.find_first_of(";#");
      if (cut != std::string::npos) v = v.substr(0, cut);
      while (!v.empty() && (v.back() == ' ' || v.back() == '\t')) v.pop_back();
      apply_setting(c, section + "." + key, v);
    }
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_config(in);
}

}  // namespace kinkclusters
