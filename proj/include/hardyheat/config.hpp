#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hardyheat/error.hpp"
#include "hardyheat/evolve.hpp"
#include "hardyheat/model.hpp"

namespace hardyheat {

/// Experiment selector for the run driver.
enum class Experiment {
  derive,
  kernel,
  evolve_run,
  source,
  vss,
  profile,
  sweep,
  verify_all,
};

inline Experiment experiment_from_name(const std::string& s) {
  if (s == "derive") return Experiment::derive;
  if (s == "kernel") return Experiment::kernel;
  if (s == "evolve") return Experiment::evolve_run;
  if (s == "source") return Experiment::source;
  if (s == "vss") return Experiment::vss;
  if (s == "profile") return Experiment::profile;
  if (s == "sweep") return Experiment::sweep;
  if (s == "verify" || s == "verify-all") return Experiment::verify_all;
  fail("BadConfig", "unknown experiment '" + s + "'");
}

inline std::string experiment_name(Experiment e) {
  switch (e) {
    case Experiment::derive: return "derive";
    case Experiment::kernel: return "kernel";
    case Experiment::evolve_run: return "evolve";
    case Experiment::source: return "source";
    case Experiment::vss: return "vss";
    case Experiment::profile: return "profile";
    case Experiment::sweep: return "sweep";
    default: return "verify";
  }
}

struct GridConfig {
  double r_max = 12.0;
  int n = 512;
  double grading = 2.0;
};

/// Flat key=value configuration with dotted sections.
struct RunConfig {
  ProblemParams problem;
  GridConfig grid;
  GridConfig profile_grid{16.0, 2048, 2.0};
  EvolveConfig evolve = default_evolve_config(1.0);
  Experiment experiment = Experiment::derive;
  std::string output_dir = "out";
  unsigned long long seed = 42;
  int jobs = 1;

  // experiment-specific knobs
  double source_varkappa = 1.0;
  double source_eps0 = 0.05;
  int source_max_halvings = 6;
  double source_rel_tol = 1e-3;

  std::vector<double> kernel_times{0.0625, 0.25, 1.0};
  std::vector<double> kernel_eps{0.05, 0.025, 0.0125, 0.00625};

  double vss_eps = 0.0;  // 0 = resolution floor of the grid
  double vss_rel_tol = 2e-2;

  double sweep_beta = 0.0;
  std::vector<double> sweep_p{1.5, 1.6, 1.7, 1.8};
  std::vector<double> sweep_eps{0.005, 0.0025, 0.00125, 0.000625};
  double sweep_varkappa = 1.0;
  double sweep_probe_r = 0.5;
  double sweep_probe_t = 0.25;
  double sweep_vanish_threshold = 0.05;
  double sweep_persist_tol = 0.02;

  std::string evolve_initial = "delta";  // delta | constant | gaussian
  double evolve_initial_value = 1.0;     // amplitude / varkappa
  double evolve_initial_width = 0.25;    // eps or gaussian s

  /// Mollification width resolved by at least `cells` cells on this grid.
  double resolution_floor(double cells = 8.5) const {
    return grid.r_max * std::pow(cells / grid.n, grid.grading);
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

struct ConfigMap {
  std::map<std::string, std::pair<std::string, int>> kv;  // value, line number

  bool has(const std::string& k) const { return kv.count(k) != 0; }

  double number(const std::string& k, double fallback) const {
    auto it = kv.find(k);
    if (it == kv.end()) return fallback;
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second.first, &pos);
      if (pos != it->second.first.size())
        fail("BadConfig", "line " + std::to_string(it->second.second) +
                              ": trailing characters in number for '" + k + "'");
      return v;
    } catch (const std::invalid_argument&) {
      fail("BadConfig", "line " + std::to_string(it->second.second) +
                            ": '" + it->second.first + "' is not a number");
    }
  }

  long long integer(const std::string& k, long long fallback) const {
    const double v = number(k, double(fallback));
    require(v == static_cast<long long>(v), "BadConfig",
            "'" + k + "' must be an integer");
    return static_cast<long long>(v);
  }

  bool boolean(const std::string& k, bool fallback) const {
    auto it = kv.find(k);
    if (it == kv.end()) return fallback;
    const std::string& s = it->second.first;
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    fail("BadConfig", "line " + std::to_string(it->second.second) +
                          ": '" + s + "' is not a boolean");
  }

  std::string text(const std::string& k, const std::string& fallback) const {
    auto it = kv.find(k);
    return it == kv.end() ? fallback : it->second.first;
  }

  std::vector<double> list(const std::string& k,
                           std::vector<double> fallback) const {
    auto it = kv.find(k);
    if (it == kv.end()) return fallback;
    std::vector<double> out;
    std::stringstream ss(it->second.first);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      try {
        out.push_back(std::stod(item));
      } catch (const std::invalid_argument&) {
        fail("BadConfig", "line " + std::to_string(it->second.second) +
                              ": bad list element '" + item + "'");
      }
    }
    return out;
  }
};

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "experiment", "output_dir", "seed", "jobs",
      "problem.N", "problem.kappa", "problem.alpha", "problem.p",
      "grid.r_max", "grid.n", "grid.grading",
      "profile.r_max", "profile.n", "profile.grading",
      "evolve.t_end", "evolve.dt0", "evolve.growth", "evolve.dt_max",
      "evolve.newton_tol", "evolve.newton_max_iter", "evolve.linear_only",
      "evolve.record_times", "evolve.rho_list",
      "evolve.initial", "evolve.initial_value", "evolve.initial_width",
      "source.varkappa", "source.eps0", "source.max_halvings",
      "source.rel_tol",
      "kernel.times", "kernel.eps_list",
      "vss.eps", "vss.rel_tol",
      "sweep.beta", "sweep.p_values", "sweep.eps_list", "sweep.varkappa",
      "sweep.probe_r", "sweep.probe_t", "sweep.vanish_threshold",
      "sweep.persist_tol",
  };
  return keys;
}

} // namespace detail

/// Parse the flat key=value format (comments with '#', dotted sections).
/// Errors carry the offending line number.
inline RunConfig parse_config_text(std::istream& in) {
  detail::ConfigMap cm;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    require(eq != std::string::npos, "BadConfig",
            "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    require(!key.empty(), "BadConfig",
            "line " + std::to_string(lineno) + ": empty key");
    require(detail::known_keys().count(key) != 0, "BadConfig",
            "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    require(!cm.kv.count(key), "BadConfig",
            "line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    cm.kv[key] = {val, lineno};
  }

  RunConfig cfg;
  if (cm.has("experiment"))
    cfg.experiment = experiment_from_name(cm.text("experiment", "derive"));
  cfg.output_dir = cm.text("output_dir", cfg.output_dir);
  cfg.seed = static_cast<unsigned long long>(cm.integer("seed", 42));
  cfg.jobs = int(cm.integer("jobs", 1));

  cfg.problem.N = int(cm.integer("problem.N", 3));
  cfg.problem.kappa = cm.number("problem.kappa", 0.0);
  cfg.problem.alpha = cm.number("problem.alpha", 0.0);
  cfg.problem.p = cm.number("problem.p", 1.5);

  cfg.grid.r_max = cm.number("grid.r_max", 12.0);
  cfg.grid.n = int(cm.integer("grid.n", 512));
  cfg.grid.grading = cm.number("grid.grading", 2.0);
  cfg.profile_grid.r_max = cm.number("profile.r_max", 16.0);
  cfg.profile_grid.n = int(cm.integer("profile.n", 2048));
  cfg.profile_grid.grading = cm.number("profile.grading", 2.0);

  const double t_end = cm.number("evolve.t_end", 1.0);
  cfg.evolve = default_evolve_config(t_end);
  cfg.evolve.dt.dt0 = cm.number("evolve.dt0", cfg.evolve.dt.dt0);
  cfg.evolve.dt.growth = cm.number("evolve.growth", cfg.evolve.dt.growth);
  cfg.evolve.dt.dt_max = cm.number("evolve.dt_max", cfg.evolve.dt.dt_max);
  cfg.evolve.newton.tol = cm.number("evolve.newton_tol", 1e-11);
  cfg.evolve.newton.max_iter = int(cm.integer("evolve.newton_max_iter", 50));
  cfg.evolve.linear_only = cm.boolean("evolve.linear_only", false);
  cfg.evolve.record_times =
      cm.list("evolve.record_times", {0.0625, 0.25, 1.0});
  cfg.evolve.rho_list = cm.list("evolve.rho_list", {0.25, 0.5, 1.0});
  cfg.evolve_initial = cm.text("evolve.initial", "delta");
  cfg.evolve_initial_value = cm.number("evolve.initial_value", 1.0);
  cfg.evolve_initial_width = cm.number("evolve.initial_width", 0.25);

  cfg.source_varkappa = cm.number("source.varkappa", 1.0);
  cfg.source_eps0 = cm.number("source.eps0", 0.05);
  cfg.source_max_halvings = int(cm.integer("source.max_halvings", 6));
  cfg.source_rel_tol = cm.number("source.rel_tol", 1e-3);

  cfg.kernel_times = cm.list("kernel.times", cfg.kernel_times);
  cfg.kernel_eps = cm.list("kernel.eps_list", cfg.kernel_eps);

  cfg.vss_eps = cm.number("vss.eps", 0.0);
  cfg.vss_rel_tol = cm.number("vss.rel_tol", 2e-2);

  cfg.sweep_beta = cm.number("sweep.beta", 0.0);
  cfg.sweep_p = cm.list("sweep.p_values", cfg.sweep_p);
  cfg.sweep_eps = cm.list("sweep.eps_list", cfg.sweep_eps);
  cfg.sweep_varkappa = cm.number("sweep.varkappa", 1.0);
  cfg.sweep_probe_r = cm.number("sweep.probe_r", 0.5);
  cfg.sweep_probe_t = cm.number("sweep.probe_t", 0.25);
  cfg.sweep_vanish_threshold = cm.number("sweep.vanish_threshold", 0.05);
  cfg.sweep_persist_tol = cm.number("sweep.persist_tol", 0.02);
  return cfg;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  require(bool(in), "BadConfig", "cannot open config file " + path);
  return parse_config_text(in);
}

} // namespace hardyheat
