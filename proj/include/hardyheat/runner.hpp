#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "hardyheat/config.hpp"
#include "hardyheat/io.hpp"
#include "hardyheat/model.hpp"
#include "hardyheat/profile.hpp"
#include "hardyheat/verify.hpp"

namespace hardyheat {

struct RunResult {
  int exit_code = 0;
  json summary;
  std::vector<VerifyReport> reports;
};

namespace detail {

// Deterministic uniform doubles independent of the standard library's
// distribution implementations.
struct Rng {
  std::mt19937_64 gen;
  explicit Rng(unsigned long long seed) : gen(seed) {}
  double uniform(double lo = 0.0, double hi = 1.0) {
    return lo + (hi - lo) * double(gen() >> 11) * 0x1.0p-53;
  }
};

inline RadialField random_nonneg_field(std::shared_ptr<const RadialGrid> g,
                                       Rng& rng) {
  RadialField u(g);
  const double w = rng.uniform(0.5, 3.0), a = rng.uniform(0.1, 2.0);
  const double phase = rng.uniform(0.0, 6.28);
  for (int i = 0; i < u.size(); ++i) {
    const double r = g->center(i);
    u.values[i] = std::max(
        0.0, a * std::exp(-r * r / (2.0 * w * w)) *
                 (1.0 + 0.3 * std::sin(3.0 * r + phase)));
  }
  return u;
}

inline json config_echo(const RunConfig& cfg) {
  json j;
  j["experiment"] = experiment_name(cfg.experiment);
  j["seed"] = cfg.seed;
  j["problem"] = {{"N", cfg.problem.N},
                  {"kappa", cfg.problem.kappa},
                  {"alpha", cfg.problem.alpha},
                  {"p", cfg.problem.p}};
  j["grid"] = {{"r_max", cfg.grid.r_max},
               {"n", cfg.grid.n},
               {"grading", cfg.grid.grading}};
  j["evolve"] = {{"t_end", cfg.evolve.t_end},
                 {"dt0", cfg.evolve.dt.dt0},
                 {"growth", cfg.evolve.dt.growth},
                 {"dt_max", cfg.evolve.dt.dt_max},
                 {"newton_tol", cfg.evolve.newton.tol},
                 {"record_times", cfg.evolve.record_times},
                 {"rho_list", cfg.evolve.rho_list}};
  return j;
}

inline json derived_to_json(const DerivedParams& d) {
  json j;
  j["lambda"] = tagged(d.lambda, "derived");
  j["beta"] = tagged(d.beta, "derived");
  j["sigma"] = tagged(d.sigma, "derived");
  j["p_star"] = tagged(d.p_star, "derived");
  j["p_star_star"] = tagged(d.p_star_star, "derived");
  return j;
}

inline json trajectory_summary(const Trajectory& traj) {
  json j;
  j["steps"] = traj.steps;
  j["absorbed_total"] = tagged(traj.absorbed_total, "measured");
  j["outflow_total"] = tagged(traj.outflow_total, "measured");
  j["clamped_total"] = tagged(traj.clamped_total, "measured");
  j["mass_identity_max_defect"] = tagged(traj.mass_identity_max, "measured");
  json snaps = json::array();
  for (const auto& s : traj.snapshots) {
    json row;
    row["t"] = s.time;
    row["sup"] = tagged(s.max(), "measured");
    row["mass"] = tagged(weighted_integral(s, s.grid->r_max()), "measured");
    snaps.push_back(row);
  }
  j["snapshots"] = snaps;
  return j;
}

/// Seeded structural invariant suite (operator symmetry, comparison,
/// contraction, positivity accounting) for the verify driver.
inline std::vector<VerifyReport> structural_suite(const RunConfig& cfg) {
  std::vector<VerifyReport> reports;
  auto grid = build_grid(cfg.grid.r_max, cfg.grid.n, cfg.grid.grading,
                         derive_params(cfg.problem).lambda, cfg.problem.N);
  DerivedParams d = derive_params(cfg.problem);
  OperatorMatrix A = assemble_laplacian(grid);
  Rng rng(cfg.seed);

  {
    VerifyReport rep;
    rep.name = "operator_weighted_symmetry";
    rep.provenance = "trivial";
    rep.tolerance = 1e-12;
    double worst_sym = 0.0, worst_pos = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> u(grid->size()), v(grid->size());
      for (auto& x : u) x = rng.uniform(-1.0, 1.0);
      for (auto& x : v) x = rng.uniform(-1.0, 1.0);
      const double auv = A.inner(A.apply(u), v);
      const double avu = A.inner(A.apply(v), u);
      const double scale = std::max({std::abs(auv), std::abs(avu), 1.0});
      worst_sym = std::max(worst_sym, std::abs(auv - avu) / scale);
      worst_pos = std::max(worst_pos, A.inner(A.apply(u), u) / scale);
    }
    rep.measured = {worst_sym, worst_pos};
    rep.reference = {0.0, 0.0};
    rep.pass = worst_sym <= 1e-12 && worst_pos <= 1e-12;
    reports.push_back(rep);
  }
  {
    VerifyReport rep;
    rep.name = "discrete_comparison";
    rep.provenance = "trivial";
    rep.tolerance = 1e-10;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      RadialField u = random_nonneg_field(grid, rng);
      RadialField v = u;
      for (auto& x : v.values) x += rng.uniform(0.0, 0.5);
      const double dt = rng.uniform(1e-4, 5e-2);
      RadialField su = step(u, dt, d.beta, cfg.problem.p, A, cfg.evolve.newton);
      RadialField sv = step(v, dt, d.beta, cfg.problem.p, A, cfg.evolve.newton);
      for (int i = 0; i < su.size(); ++i)
        worst = std::max(worst, su.values[i] - sv.values[i]);
    }
    rep.measured = {worst};
    rep.reference = {0.0};
    rep.pass = worst <= rep.tolerance;
    reports.push_back(rep);
  }
  {
    VerifyReport rep;
    rep.name = "l1_contraction";
    rep.provenance = "derived";
    rep.tolerance = 1e-10;
    EvolveConfig ec = default_evolve_config(0.2);
    ec.record_times = {0.2};
    ec.newton = cfg.evolve.newton;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      RadialField u0 = random_nonneg_field(grid, rng);
      RadialField v0 = random_nonneg_field(grid, rng);
      Trajectory tu = evolve(u0, ec, cfg.problem, d, A);
      Trajectory tv = evolve(v0, ec, cfg.problem, d, A);
      const double after =
          weighted_l1_distance(tu.snapshots[0], tv.snapshots[0]);
      const double before = weighted_l1_distance(u0, v0);
      worst = std::max(worst, (after - before) / std::max(before, 1e-300));
    }
    rep.measured = {worst};
    rep.reference = {0.0};
    rep.pass = worst <= rep.tolerance;
    reports.push_back(rep);
  }
  {
    VerifyReport rep;
    rep.name = "positivity_and_mass_identity";
    rep.provenance = "trivial";
    EvolveConfig ec = default_evolve_config(0.5);
    ec.record_times = {0.5};
    ec.newton = cfg.evolve.newton;
    RadialField u0 = mollified_delta(grid, 1.0, cfg.source_eps0);
    Trajectory tr = evolve(u0, ec, cfg.problem, d, A);
    rep.measured = {tr.clamped_total, tr.mass_identity_max};
    rep.reference = {0.0, 0.0};
    rep.tolerance = 1e-10;
    rep.pass = tr.clamped_total < 1e-10 && tr.mass_identity_max < 1e-8;
    rep.notes = "clamped mass, per-step balance defect";
    reports.push_back(rep);
  }
  {
    VerifyReport rep;
    rep.name = "hardy_rayleigh_minimum";
    rep.provenance = "paper";
    rep.tolerance = 0.05;
    auto hg = build_grid(cfg.grid.r_max, 512, 6.0, d.lambda, cfg.problem.N);
    const double mu = hardy_rayleigh_min(*hg);
    const double ref =
        0.25 * (cfg.problem.N - 2 + 2 * d.lambda) * (cfg.problem.N - 2 + 2 * d.lambda);
    rep.measured = {mu};
    rep.reference = {ref};
    rep.pass = std::abs(mu - ref) <= 0.05 * ref;
    reports.push_back(rep);
  }
  {
    VerifyReport rep;
    rep.name = "hardy_K_inequality";
    rep.provenance = "paper";
    rep.tolerance = 1e-2;
    auto hg = build_grid(cfg.grid.r_max, std::max(512, cfg.grid.n),
                         cfg.grid.grading, d.lambda, cfg.problem.N);
    RadialField theta = RadialField::of(hg, [](double r) {
      const double s = std::max(0.0, 1.0 - r * r);
      return s * s;
    });
    auto hk = hardy_K_inequality_check(hg, d.lambda, theta, 1e-2);
    rep.measured = {hk.lhs, hk.rhs};
    rep.reference = {hk.rhs, hk.rhs};
    rep.pass = hk.holds;
    reports.push_back(rep);
  }
  return reports;
}

} // namespace detail

/// Execute the configured experiment, writing summary.json and artifact
/// files into cfg.output_dir.  Deterministic given (config, seed).
inline RunResult run(const RunConfig& cfg) {
  RunResult res;
  const std::string dir = cfg.output_dir;
  json& summary = res.summary;
  summary["config"] = detail::config_echo(cfg);

  DerivedParams d = derive_params(cfg.problem);
  summary["derived"] = detail::derived_to_json(d);

  switch (cfg.experiment) {
    case Experiment::derive: {
      RegimeReport reg = classify_regime(cfg.problem, d);
      json r;
      r["criticality"] = reg.criticality_name();
      r["subregime"] = reg.subregime_name();
      r["singular_solutions_exist"] = reg.singular_solutions_exist;
      r["p_mass_threshold"] = tagged(reg.p_mass_threshold, "derived");
      r["lebesgue_mass_slope_reference"] = tagged(reg.mass_slope, "reference");
      summary["regime"] = r;
      break;
    }
    case Experiment::kernel: {
      auto grid = build_grid(cfg.grid.r_max, cfg.grid.n, cfg.grid.grading,
                             d.lambda, cfg.problem.N);
      KernelFamily fam = heat_kernel_family(grid, cfg.kernel_times,
                                            cfg.kernel_eps, cfg.evolve);
      json ks = json::array();
      double c_global = 0.0;
      for (std::size_t j = 0; j < fam.times.size(); ++j) {
        double c_t = 0.0;
        for (int i = 0; i < fam.fields[j].size(); ++i) {
          const double env = kernel_bound_envelope(
              fam.times[j], grid->center(i), grid->dim(), grid->lambda());
          c_t = std::max(c_t, fam.fields[j].values[i] / env);
        }
        c_global = std::max(c_global, c_t);
        json row;
        row["t"] = fam.times[j];
        row["mass"] = tagged(fam.mass[j], "measured");
        row["c_delta"] = tagged(c_t, "fitted");
        row["value_at_origin"] = tagged(fam.fields[j].values[0], "measured");
        ks.push_back(row);
        write_field_csv(dir + "/kernel_t" + format_g17(fam.times[j]) + ".csv",
                        fam.fields[j]);
      }
      summary["kernel"] = {{"times", ks},
                           {"c_delta_global", tagged(c_global, "fitted")},
                           {"eps_error_l1", tagged(fam.eps_error_l1, "measured")},
                           {"observed_order", tagged(fam.observed_order, "measured")}};
      break;
    }
    case Experiment::evolve_run: {
      auto grid = build_grid(cfg.grid.r_max, cfg.grid.n, cfg.grid.grading,
                             d.lambda, cfg.problem.N);
      OperatorMatrix A = assemble_laplacian(grid);
      RadialField u0(grid);
      if (cfg.evolve_initial == "delta") {
        u0 = mollified_delta(grid, cfg.evolve_initial_value,
                             cfg.evolve_initial_width);
      } else if (cfg.evolve_initial == "constant") {
        for (auto& x : u0.values) x = cfg.evolve_initial_value;
      } else if (cfg.evolve_initial == "gaussian") {
        const double s = cfg.evolve_initial_width;
        u0 = RadialField::of(grid, [&](double r) {
          return cfg.evolve_initial_value * std::exp(-r * r / (4.0 * s)) /
                 std::pow(4.0 * M_PI * s, 1.5);
        });
      } else {
        fail("BadConfig", "unknown initial data '" + cfg.evolve_initial + "'");
      }
      Trajectory tr = evolve(u0, cfg.evolve, cfg.problem, d, A);
      write_trajectory_csv(dir + "/trajectory.csv", tr);
      write_diagnostics_csv(dir + "/diagnostics.csv", tr);
      summary["evolve"] = detail::trajectory_summary(tr);
      break;
    }
    case Experiment::source: {
      auto grid = build_grid(cfg.grid.r_max, cfg.grid.n, cfg.grid.grading,
                             d.lambda, cfg.problem.N);
      OperatorMatrix A = assemble_laplacian(grid);
      SourceResult src = source_solution(
          cfg.source_varkappa, cfg.problem, d, grid, A, cfg.evolve,
          cfg.source_eps0, cfg.source_max_halvings, cfg.source_rel_tol, true);
      write_trajectory_csv(dir + "/trajectory.csv", src.traj);
      write_diagnostics_csv(dir + "/diagnostics.csv", src.traj);
      summary["source"] = detail::trajectory_summary(src.traj);
      summary["source"]["varkappa"] = tagged(cfg.source_varkappa, "config");
      summary["source"]["eps_achieved"] = tagged(src.epsilon_achieved, "measured");
      summary["source"]["eps_changes"] = src.eps_change;
      summary["source"]["converged"] = src.converged;

      res.reports.push_back(
          kernel_domination(src.traj, src.linear_twin, cfg.source_varkappa));
      res.reports.push_back(initial_trace(src.traj, cfg.evolve.rho_list,
                                          cfg.source_varkappa));
      res.reports.push_back(source_kernel_match(src.traj, src.linear_twin,
                                                cfg.source_varkappa));
      res.reports.push_back(keller_osserman(src.traj, d));
      break;
    }
    case Experiment::vss: {
      auto grid = build_grid(cfg.grid.r_max, cfg.grid.n, cfg.grid.grading,
                             d.lambda, cfg.problem.N);
      OperatorMatrix A = assemble_laplacian(grid);
      const double eps =
          cfg.vss_eps > 0.0 ? cfg.vss_eps : cfg.resolution_floor();
      VssResult vss =
          vss_by_saturation(cfg.problem, d, grid, A, cfg.evolve, eps,
                            cfg.vss_rel_tol);
      write_trajectory_csv(dir + "/trajectory.csv", vss.traj);
      write_diagnostics_csv(dir + "/diagnostics.csv", vss.traj);
      summary["vss"] = detail::trajectory_summary(vss.traj);
      summary["vss"]["saturated"] = vss.saturated;
      summary["vss"]["varkappa_reached"] = tagged(vss.varkappa_reached, "measured");
      summary["vss"]["eps"] = tagged(eps, "config");
      json log = json::array();
      for (auto& [vk, ch] : vss.saturation_log)
        log.push_back({{"varkappa", vk}, {"change", ch}});
      summary["vss"]["saturation_log"] = log;
      res.reports.push_back(initial_trace(vss.traj, cfg.evolve.rho_list, -1.0));
      res.reports.push_back(keller_osserman(vss.traj, d));
      break;
    }
    case Experiment::profile: {
      auto grid = build_grid(cfg.profile_grid.r_max, cfg.profile_grid.n,
                             cfg.profile_grid.grading, d.lambda, cfg.problem.N);
      ProfileSolution var = minimize_J(cfg.problem, d, grid);
      ProfileSolution shot = shoot_profile(cfg.problem, d, grid);
      write_profile_csv(dir + "/profile_variational.csv", var);
      write_profile_csv(dir + "/profile_shooting.csv", shot);
      DecayReport dec = check_decay(var);
      double worst = 0.0, scale = 0.0;
      for (int i = 0; i < grid->size(); ++i) {
        if (grid->center(i) > 6.0) break;
        worst = std::max(worst, std::abs(var.v[i] - shot.v[i]));
        scale = std::max(scale, std::abs(shot.v[i]));
      }
      json pj;
      pj["a_star"] = tagged(shot.a_star, "measured");
      pj["J_variational"] = tagged(var.J_value, "measured");
      pj["J_shooting"] = tagged(shot.J_value, "measured");
      pj["el_residual_variational"] = tagged(var.EL_residual_norm, "measured");
      pj["decay_constant"] = tagged(dec.C, "measured");
      pj["cross_method_linf"] = tagged(worst / scale, "measured");
      pj["coercivity_C_eps"] = tagged(var.fitted_C_eps, "fitted");
      pj["iterations"] = var.iterations;
      summary["profile"] = pj;

      VerifyReport rep;
      rep.name = "profile_cross_validation";
      rep.provenance = "derived";
      rep.tolerance = 1e-3;
      rep.measured = {worst / scale, var.EL_residual_norm, var.J_value, dec.C};
      rep.reference = {0.0, 0.0, 0.0, 0.0};
      rep.pass = worst / scale <= 1e-3 && var.EL_residual_norm < 1e-6 &&
                 var.J_value < 0.0 && std::isfinite(dec.C);
      res.reports.push_back(rep);
      break;
    }
    case Experiment::sweep: {
      auto grid = build_grid(cfg.grid.r_max, cfg.grid.n, cfg.grid.grading,
                             d.lambda, cfg.problem.N);
      OperatorMatrix A = assemble_laplacian(grid);
      SweepOptions opt;
      opt.varkappa = cfg.sweep_varkappa;
      opt.probe_r = cfg.sweep_probe_r;
      opt.probe_t = cfg.sweep_probe_t;
      opt.vanish_threshold = cfg.sweep_vanish_threshold;
      opt.persist_tol = cfg.sweep_persist_tol;
      opt.jobs = cfg.jobs;
      SweepResult sw =
          critical_sweep(cfg.problem.N, cfg.problem.kappa, cfg.sweep_beta,
                         cfg.sweep_p, cfg.sweep_eps, grid, A, cfg.evolve, opt);
      // table CSV: one row per p
      {
        auto out = detail::open_out(dir + "/sweep.csv");
        out << "p,p_star";
        for (double e : cfg.sweep_eps) out << ",probe_eps" << format_g17(e);
        out << ",last_ratio,classification\n";
        for (const auto& c : sw.cells) {
          out << format_g17(c.p) << ',' << format_g17(c.p_star);
          for (double v : c.probe_values) out << ',' << format_g17(v);
          out << ',' << format_g17(c.last_ratio) << ',' << c.classification
              << '\n';
        }
      }
      json cells = json::array();
      for (const auto& c : sw.cells)
        cells.push_back({{"p", c.p},
                         {"classification", c.classification},
                         {"last_ratio", tagged(c.last_ratio, "measured")}});
      summary["sweep"] = {{"cells", cells},
                          {"p_star", tagged(sw.cells.front().p_star, "reference")},
                          {"pass", sw.report.pass},
                          {"notes", sw.report.notes}};
      res.reports.push_back(sw.report);
      break;
    }
    case Experiment::verify_all: {
      res.reports = detail::structural_suite(cfg);
      break;
    }
  }

  json rj = json::array();
  bool all_pass = true;
  for (const auto& r : res.reports) {
    rj.push_back(report_to_json(r));
    all_pass = all_pass && r.pass;
  }
  summary["reports"] = rj;
  summary["all_pass"] = all_pass;
  res.exit_code = all_pass ? 0 : 1;

  write_text(dir + "/summary.json", summary.dump(2) + "\n");
  if (!res.reports.empty()) {
    write_reports_json(dir + "/reports.json", res.reports);
    write_text(dir + "/reports.txt", render_report_table(res.reports));
  }
  return res;
}

struct CompareEntry {
  std::string key;
  double a = 0.0, b = 0.0;
  double rel_diff = 0.0;
  bool parameter_change = false;
};

struct CompareResult {
  std::vector<CompareEntry> entries;
  double worst_rel_diff = 0.0;
  bool parameter_change = false;
};

namespace detail {

inline void compare_walk(const json& a, const json& b, const std::string& path,
                         CompareResult& out) {
  if (a.is_object() && b.is_object()) {
    for (auto it = a.begin(); it != a.end(); ++it)
      if (b.contains(it.key()))
        compare_walk(it.value(), b.at(it.key()), path + "/" + it.key(), out);
    return;
  }
  if (a.is_array() && b.is_array()) {
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i)
      compare_walk(a[i], b[i], path + "[" + std::to_string(i) + "]", out);
    return;
  }
  if (a.is_number() && b.is_number()) {
    CompareEntry e;
    e.key = path;
    e.a = a.get<double>();
    e.b = b.get<double>();
    const double scale = std::max({std::abs(e.a), std::abs(e.b), 1e-300});
    e.rel_diff = std::abs(e.a - e.b) / scale;
    e.parameter_change = path.rfind("/config", 0) == 0;
    if (e.rel_diff > 0.0) {
      out.entries.push_back(e);
      if (e.parameter_change)
        out.parameter_change = true;
      else
        out.worst_rel_diff = std::max(out.worst_rel_diff, e.rel_diff);
    }
  }
}

} // namespace detail

/// Field-by-field numeric diff of two run summaries.  Differences under the
/// config block are flagged as parameter changes, not failures.  Mismatched
/// experiment types are a schema error.
inline CompareResult compare_runs(const std::string& dir_a,
                                  const std::string& dir_b) {
  json a = load_json(dir_a + "/summary.json");
  json b = load_json(dir_b + "/summary.json");
  require(a.contains("config") && b.contains("config"), "SchemaMismatch",
          "summary.json without config block");
  require(a["config"]["experiment"] == b["config"]["experiment"],
          "SchemaMismatch", "runs are different experiment types");
  CompareResult out;
  detail::compare_walk(a, b, "", out);
  return out;
}

} // namespace hardyheat
