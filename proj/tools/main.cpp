#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "hardyheat/config.hpp"
#include "hardyheat/io.hpp"
#include "hardyheat/runner.hpp"

using namespace hardyheat;

namespace {

int run_experiment(const std::string& config_path, const std::string& out_dir,
                   long long seed, int jobs, Experiment experiment,
                   bool experiment_forced) {
  RunConfig cfg =
      config_path.empty() ? RunConfig{} : parse_config(config_path);
  if (experiment_forced) cfg.experiment = experiment;
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (seed >= 0) cfg.seed = static_cast<unsigned long long>(seed);
  if (jobs > 0) cfg.jobs = jobs;

  RunResult res = run(cfg);
  std::printf("experiment: %s\n", experiment_name(cfg.experiment).c_str());
  if (!res.reports.empty())
    std::fputs(render_report_table(res.reports).c_str(), stdout);
  std::printf("summary: %s/summary.json\n", cfg.output_dir.c_str());
  return res.exit_code;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Radial laboratory for singular solutions of the heat equation with "
      "Hardy potential and nonlinear absorption"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir;
  long long seed = -1;
  int jobs = 0;
  app.add_option("--config", config_path, "run configuration file (key=value)");
  app.add_option("--out", out_dir, "output directory (overrides config)");
  app.add_option("--seed", seed, "seed for randomized suites (overrides config)");
  app.add_option("--jobs", jobs, "worker threads for sweeps (overrides config)");

  struct Verb {
    const char* name;
    const char* help;
    Experiment experiment;
  };
  const Verb verbs[] = {
      {"derive", "derived exponents and regime classification", Experiment::derive},
      {"kernel", "weighted heat kernel with eps extrapolation", Experiment::kernel},
      {"evolve", "generic implicit evolution run", Experiment::evolve_run},
      {"source", "source-type solution u_varkappa", Experiment::source},
      {"vss", "very singular solution by saturation", Experiment::vss},
      {"profile", "self-similar profile (variational + shooting)", Experiment::profile},
      {"sweep", "criticality classification sweep over p", Experiment::sweep},
      {"verify", "structural invariant suite", Experiment::verify_all},
  };
  for (const auto& v : verbs) app.add_subcommand(v.name, v.help);

  auto* compare = app.add_subcommand("compare", "numeric diff of two run summaries");
  std::string dir_a, dir_b;
  compare->add_option("dir_a", dir_a, "first run directory")->required();
  compare->add_option("dir_b", dir_b, "second run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (compare->parsed()) {
      CompareResult res = compare_runs(dir_a, dir_b);
      for (const auto& e : res.entries)
        std::printf("%-14s %-52s %.17g -> %.17g (rel %.3e)\n",
                    e.parameter_change ? "param-change" : "diff",
                    e.key.c_str(), e.a, e.b, e.rel_diff);
      std::printf("worst relative difference (non-parameter): %.3e\n",
                  res.worst_rel_diff);
      if (res.parameter_change)
        std::puts("note: runs differ in parameters");
      return 0;
    }
    for (const auto& v : verbs)
      if (app.get_subcommand(v.name)->parsed())
        return run_experiment(config_path, out_dir, seed, jobs, v.experiment,
                              true);
    return 1;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
