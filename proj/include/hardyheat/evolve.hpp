#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "hardyheat/grid.hpp"
#include "hardyheat/model.hpp"
#include "hardyheat/operators.hpp"

namespace hardyheat {

struct DtSchedule {
  double dt0 = 1e-6;
  double growth = 1.05;
  double dt_max = 1e-2;
};

struct NewtonConfig {
  double tol = 1e-11;  // sup-norm residual, relative to 1 + sup|u|
  int max_iter = 50;
};

struct EvolveConfig {
  double t_end = 1.0;
  DtSchedule dt;
  NewtonConfig newton;
  bool linear_only = false;
  std::vector<double> record_times;
  std::vector<double> rho_list{0.25, 0.5, 1.0};
  std::size_t max_diag_rows = 40000;

  void validate() const {
    require(t_end > 0.0, "BadConfig", "t_end must be positive");
    require(dt.dt0 > 0.0, "BadConfig", "dt0 must be positive");
    require(dt.growth >= 1.0 && dt.growth <= 1.2, "BadConfig",
            "dt growth factor must lie in [1, 1.2]");
    require(dt.dt_max >= dt.dt0, "BadConfig", "dt_max must be >= dt0");
    for (double t : record_times)
      require(t >= 0.0 && t <= t_end * (1.0 + 1e-12), "BadConfig",
              "record times must lie in [0, t_end]");
    require(std::is_sorted(record_times.begin(), record_times.end()),
            "BadConfig", "record times must be increasing");
  }
};

/// Geometric schedule resolving the t -> 0 layer: dt0 = 1e-6 t_end,
/// growth 1.05, cap t_end / 100.
inline EvolveConfig default_evolve_config(double t_end) {
  EvolveConfig cfg;
  cfg.t_end = t_end;
  cfg.dt = {1e-6 * t_end, 1.05, t_end / 100.0};
  return cfg;
}

struct StepStats {
  int newton_iters = 0;
  double residual = 0.0;
  double clamped_mass = 0.0;  // weighted mass removed by the positivity clamp
};

/// One implicit Euler step of the weighted semilinear equation:
/// solve (I - dt A) v + dt r^beta v^p = u by Newton on the tridiagonal system.
inline RadialField step(const RadialField& u, double dt, double beta, double p,
                        const OperatorMatrix& A, const NewtonConfig& newton,
                        bool linear_only = false, StepStats* stats = nullptr) {
  require(dt > 0.0, "BadConfig", "step needs dt > 0");
  const int n = u.size();
  const RadialGrid& g = *u.grid;
  // Tolerances are relative to the data size, so small-mass runs are solved
  // as accurately as O(1) ones.
  const double scale = std::abs(u.max()) + 1e-300;
  require(u.min() >= -1e-12 * scale, "NegativeUndershoot",
          "step input is not nonnegative");

  RadialField out = u;
  out.time = u.time + dt;

  if (linear_only) {
    // (I - dt A) v = u  ==  ((1/dt) I - A) v = u / dt
    std::vector<double> rhs = u.values;
    for (auto& x : rhs) x /= dt;
    out.values = A.solve_shifted(1.0 / dt, {}, rhs);
  } else {
    std::vector<double> v = u.values;
    std::vector<double> rbeta(n);
    for (int i = 0; i < n; ++i) rbeta[i] = std::pow(g.center(i), beta);

    auto residual = [&](const std::vector<double>& w) {
      std::vector<double> r = A.apply(w);
      for (int i = 0; i < n; ++i) {
        const double gw = rbeta[i] * std::pow(std::abs(w[i]), p - 1.0) * w[i];
        r[i] = w[i] - dt * r[i] + dt * gw - u.values[i];
      }
      return r;
    };
    // Residuals are measured row-scaled: graded meshes make the origin rows
    // arbitrarily stiff (dt |diag| up to 1e13), where the raw residual has a
    // roundoff floor far above tolerance while its effect on the solution is
    // damped by exactly that stiffness.
    std::vector<double> rowscale(n);
    for (int i = 0; i < n; ++i) rowscale[i] = 1.0 + dt * std::abs(A.diag(i));
    auto supnorm = [&](const std::vector<double>& r) {
      double m = 0.0;
      for (int i = 0; i < n; ++i) m = std::max(m, std::abs(r[i]) / rowscale[i]);
      return m;
    };

    std::vector<double> res = residual(v);
    double rnorm = supnorm(res);
    int it = 0;
    // Primary stop: scaled residual below tol * scale; a stall inside the
    // asymptotic basin is accepted once the increment is negligible.
    const double basin = 1e6 * newton.tol * scale;
    for (; it < newton.max_iter && rnorm > newton.tol * scale; ++it) {
      std::vector<double> extra(n), neg(n);
      for (int i = 0; i < n; ++i) {
        extra[i] = p * rbeta[i] * std::pow(std::abs(v[i]), p - 1.0);
        neg[i] = -res[i] / dt;
      }
      // ((1/dt) I - A + diag(g')) delta = -res/dt == (I - dt A + dt g') delta = -res
      std::vector<double> delta = A.solve_shifted(1.0 / dt, extra, neg);

      double damping = 1.0;
      bool moved = false;
      for (int k = 0; k < 40; ++k, damping *= 0.5) {
        std::vector<double> trial(n);
        for (int i = 0; i < n; ++i) trial[i] = v[i] + damping * delta[i];
        std::vector<double> tres = residual(trial);
        const double tnorm = supnorm(tres);
        if (tnorm < rnorm || tnorm <= newton.tol * scale) {
          v = std::move(trial);
          res = std::move(tres);
          rnorm = tnorm;
          moved = true;
          break;
        }
      }
      double dsup = 0.0;
      for (double x : delta) dsup = std::max(dsup, std::abs(x));
      if (moved && rnorm <= basin && dsup * damping <= newton.tol * scale)
        break;
      if (!moved) {
        if (rnorm <= basin) break;  // stalled at the attainable floor
        char msg[128];
        std::snprintf(msg, sizeof msg, "stalled with residual %.3e (scale %.3e)",
                      rnorm, scale);
        fail("NewtonDiverged", msg);
      }
    }
    if (rnorm > basin) {
      char msg[128];
      std::snprintf(msg, sizeof msg,
                    "no convergence in %d iterations, residual %.3e",
                    newton.max_iter, rnorm);
      fail("NewtonDiverged", msg);
    }
    out.values = std::move(v);
    if (stats) {
      stats->newton_iters = it;
      stats->residual = rnorm;
    }
  }

  // Positivity: the discrete system is monotone, so genuine negatives signal
  // a solver problem; round-off level negatives are clamped and accounted.
  double clamped = 0.0;
  for (int i = 0; i < n; ++i) {
    if (out.values[i] < 0.0) {
      if (out.values[i] < -1e-14 * scale)
        fail("NegativeUndershoot", "positivity lost at r = " +
                                       std::to_string(g.center(i)) +
                                       ", value " + std::to_string(out.values[i]));
      clamped += -out.values[i] * g.cell_mass(i);
      out.values[i] = 0.0;
    }
  }
  if (stats) stats->clamped_mass = g.omega() * clamped;
  return out;
}

struct StepDiagnostics {
  double t = 0.0;
  std::vector<double> ball_mass;  // weighted mass over each configured B_rho
  double sup = 0.0;
  double absorbed_cum = 0.0;  // ∫∫ r^beta u^p h^2 dx dt so far
  double outflow_cum = 0.0;   // weighted mass lost through the outer boundary
  double clamped_cum = 0.0;
};

struct SnapshotStep {
  RadialField prev;  // state one solver step before the snapshot
  double dt = 0.0;
};

struct Trajectory {
  std::vector<RadialField> snapshots;
  std::vector<SnapshotStep> snapshot_steps;
  std::vector<StepDiagnostics> diagnostics;
  std::vector<double> rho_list;
  double varkappa = 0.0;
  double epsilon = 0.0;
  bool saturated = false;
  bool eps_converged = true;
  double absorbed_total = 0.0;
  double outflow_total = 0.0;
  double clamped_total = 0.0;
  double mass_identity_max = 0.0;  // worst per-step defect of the mass balance
  long long steps = 0;

  const RadialField& at_time(double t) const {
    for (const auto& s : snapshots)
      if (std::abs(s.time - t) <= 1e-10 * (1.0 + t)) return s;
    fail("OutOfRange", "no snapshot at t = " + std::to_string(t));
  }
};

/// Implicit evolution with the geometric dt schedule, stepping exactly onto
/// record times.  Per step, the discrete balance
///   d(mass) = -dt ∫ r^beta u^p h^2 - dt (outer flux)
/// is accumulated and its worst defect reported.
inline Trajectory evolve(const RadialField& u0, const EvolveConfig& cfg,
                         const ProblemParams& pr, const DerivedParams& d,
                         const OperatorMatrix& A) {
  cfg.validate();
  require(u0.frame == Frame::weighted, "FrameMismatch",
          "evolution runs in the weighted frame");
  const RadialGrid& g = *u0.grid;
  const int n = u0.size();

  Trajectory traj;
  traj.rho_list = cfg.rho_list;

  RadialField u = u0;
  u.time = 0.0;
  std::size_t rec = 0;
  while (rec < cfg.record_times.size() && cfg.record_times[rec] <= 0.0) {
    traj.snapshots.push_back(u);
    traj.snapshot_steps.push_back({u, 0.0});
    ++rec;
  }

  const double outer_coef =
      g.weight_at(g.r_max()) / (g.r_max() - g.center(n - 1));
  auto mass_of = [&](const std::vector<double>& v) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += v[i] * g.cell_mass(i);
    return g.omega() * s;
  };

  auto push_diag = [&](const RadialField& f) {
    StepDiagnostics row;
    row.t = f.time;
    row.sup = f.max();
    for (double rho : cfg.rho_list)
      row.ball_mass.push_back(weighted_integral(f, rho));
    row.absorbed_cum = traj.absorbed_total;
    row.outflow_cum = traj.outflow_total;
    row.clamped_cum = traj.clamped_total;
    traj.diagnostics.push_back(std::move(row));
  };
  push_diag(u);

  double t = 0.0, nominal = cfg.dt.dt0;
  std::size_t diag_stride = 1, since_diag = 0;
  const double t_tiny = 1e-14 * std::max(1.0, cfg.t_end);
  while (t < cfg.t_end - t_tiny) {
    double dt = std::min(nominal, cfg.dt.dt_max);
    dt = std::min(dt, cfg.t_end - t);
    bool onto_record = false;
    if (rec < cfg.record_times.size() && t + dt >= cfg.record_times[rec] - t_tiny) {
      dt = cfg.record_times[rec] - t;
      onto_record = true;
      if (dt <= 0.0) {
        traj.snapshots.push_back(u);
        traj.snapshot_steps.push_back({u, 0.0});
        ++rec;
        continue;
      }
    }

    StepStats st;
    RadialField next = step(u, dt, d.beta, pr.p, A, cfg.newton, cfg.linear_only, &st);
    t = onto_record ? cfg.record_times[rec] : t + dt;
    next.time = t;
    ++traj.steps;

    // Discrete mass balance for this step.
    const double absorbed_rate =
        cfg.linear_only ? 0.0
                        : [&] {
                            double s = 0.0;
                            for (int i = 0; i < n; ++i)
                              s += std::pow(g.center(i), d.beta) *
                                   std::pow(next.values[i], pr.p) * g.cell_mass(i);
                            return g.omega() * s;
                          }();
    const double outflow_rate = g.omega() * outer_coef * next.values[n - 1];
    const double dm = mass_of(next.values) - mass_of(u.values);
    const double defect =
        dm + dt * absorbed_rate + dt * outflow_rate - st.clamped_mass;
    traj.mass_identity_max = std::max(traj.mass_identity_max, std::abs(defect));
    traj.absorbed_total += dt * absorbed_rate;
    traj.outflow_total += dt * outflow_rate;
    traj.clamped_total += st.clamped_mass;

    if (onto_record) {
      traj.snapshots.push_back(next);
      traj.snapshot_steps.push_back({u, dt});
      ++rec;
    }
    u = std::move(next);

    if (++since_diag >= diag_stride || onto_record) {
      since_diag = 0;
      push_diag(u);
      if (traj.diagnostics.size() > cfg.max_diag_rows) {
        std::vector<StepDiagnostics> thin;
        thin.reserve(traj.diagnostics.size() / 2 + 1);
        for (std::size_t i = 0; i < traj.diagnostics.size(); i += 2)
          thin.push_back(std::move(traj.diagnostics[i]));
        traj.diagnostics = std::move(thin);
        diag_stride *= 2;
      }
    }
    nominal = std::min(nominal * cfg.dt.growth, cfg.dt.dt_max);
  }
  return traj;
}

/// Gaussian bump of width eps carrying exact weighted mass varkappa.  The
/// bump is smoothly cut off at 4 eps: a compactly supported datum is what
/// converges to varkappa delta_0, and without the cutoff the Gaussian tail
/// exceeds the absorption ceiling at every radius once varkappa is large,
/// so the saturation limit would drift toward the flat solution instead of
/// the very singular one.
inline RadialField mollified_delta(std::shared_ptr<const RadialGrid> grid,
                                   double varkappa, double eps) {
  const RadialGrid& g = *grid;
  require(varkappa > 0.0 && std::isfinite(varkappa), "InvalidParams",
          "varkappa must be positive and finite");
  require(eps > 0.0 && eps < g.r_max() / 10.0, "InvalidParams",
          "mollification width must lie in (0, r_max/10)");
  int inside = 0;
  for (int i = 0; i < g.size() && g.center(i) < eps; ++i) ++inside;
  require(inside >= 8, "UnderResolved",
          "fewer than 8 cells inside the mollification radius " +
              std::to_string(eps));
  RadialField u = RadialField::of(grid, [eps](double r) {
    const double s = r / eps;
    if (s >= 4.0) return 0.0;
    const double ramp =
        s <= 3.0 ? 1.0 : 0.5 * (1.0 + std::cos(M_PI * (s - 3.0)));
    return ramp * std::exp(-0.5 * s * s);
  });
  const double mass = weighted_integral(u, g.r_max());
  for (auto& v : u.values) v *= varkappa / mass;
  return u;
}

/// Heat kernel of the weighted Laplacian at several times, by linear
/// evolution of mollified Dirac data and Richardson extrapolation in eps^2.
struct KernelFamily {
  std::vector<double> times;
  std::vector<RadialField> fields;           // extrapolated kernel per time
  std::vector<RadialField> fields_last_eps;  // finest un-extrapolated iterate
  std::vector<double> eps_used;
  double eps_error_l1 = 0.0;   // L1 distance of the last two eps iterates
  double observed_order = 0.0; // convergence order in eps
  std::vector<double> mass;    // weighted mass of the extrapolated kernel
};

inline KernelFamily heat_kernel_family(std::shared_ptr<const RadialGrid> grid,
                                       std::vector<double> times,
                                       std::vector<double> eps_seq,
                                       EvolveConfig cfg) {
  require(!times.empty() && !eps_seq.empty(), "BadConfig",
          "kernel needs times and an eps sequence");
  std::sort(times.begin(), times.end());
  require(times.front() > 0.0, "BadConfig", "kernel times must be positive");
  std::sort(eps_seq.begin(), eps_seq.end(), std::greater<>());

  cfg.linear_only = true;
  cfg.t_end = times.back();
  cfg.record_times = times;

  OperatorMatrix A(grid, MeasureKind::weighted);
  ProblemParams dummy;  // unused in linear mode
  DerivedParams d;
  d.lambda = grid->lambda();

  KernelFamily fam;
  fam.times = times;
  fam.eps_used = eps_seq;

  std::vector<std::vector<RadialField>> per_eps;
  for (double eps : eps_seq) {
    RadialField u0 = mollified_delta(grid, 1.0, eps);
    EvolveConfig level_cfg = cfg;
    level_cfg.dt.dt0 = std::min(cfg.dt.dt0, 0.02 * eps * eps);
    Trajectory tr = evolve(u0, level_cfg, dummy, d, A);
    per_eps.push_back(tr.snapshots);
  }
  const std::size_t ne = eps_seq.size();
  std::vector<double> dist(ne, 0.0);
  for (std::size_t k = 1; k < ne; ++k)
    for (std::size_t j = 0; j < times.size(); ++j)
      dist[k] = std::max(dist[k], weighted_l1_distance(per_eps[k][j],
                                                       per_eps[k - 1][j]));
  if (ne >= 2) {
    fam.eps_error_l1 = dist[ne - 1];
    if (fam.eps_error_l1 > 1e-3)
      fail("NotConverged", "kernel eps-iterates differ by " +
                               std::to_string(fam.eps_error_l1) + " in L1");
  }
  if (ne >= 3 && dist[ne - 1] > 0.0) {
    const double h = std::log(eps_seq[ne - 2] / eps_seq[ne - 1]);
    fam.observed_order = std::log(dist[ne - 1 - 1] / dist[ne - 1]) / h;
  }

  for (std::size_t j = 0; j < times.size(); ++j) {
    RadialField extr = per_eps[ne - 1][j];
    if (ne >= 2) {
      const double e1 = eps_seq[ne - 2], e2 = eps_seq[ne - 1];
      const double f = e2 * e2 / (e1 * e1 - e2 * e2);
      for (int i = 0; i < extr.size(); ++i)
        extr.values[i] += f * (per_eps[ne - 1][j].values[i] -
                               per_eps[ne - 2][j].values[i]);
    }
    fam.fields.push_back(extr);
    fam.fields_last_eps.push_back(per_eps[ne - 1][j]);
    fam.mass.push_back(weighted_integral(extr, grid->r_max()));
  }
  return fam;
}

struct KernelResult {
  RadialField kernel;
  double mass = 0.0;
  double eps_error_l1 = 0.0;
  double observed_order = 0.0;
  double fitted_c_delta = 0.0;  // smallest constant for the delta=1/2 envelope
  std::vector<double> eps_used;
};

/// Envelope of the kernel bound with delta = 1/2:
/// t^{-(N+2λ)/2} e^{-r^2/(6t)} (r/sqrt(t) + 1)^{-λ}   (4(1+δ) = 6).
inline double kernel_bound_envelope(double t, double r, int N, double lambda) {
  return std::pow(t, -0.5 * (N + 2.0 * lambda)) *
         std::exp(-r * r / (6.0 * t)) *
         std::pow(r / std::sqrt(t) + 1.0, -lambda);
}

inline KernelResult heat_kernel(std::shared_ptr<const RadialGrid> grid, double t,
                                std::vector<double> eps_seq, EvolveConfig cfg) {
  KernelFamily fam = heat_kernel_family(grid, {t}, std::move(eps_seq), cfg);
  KernelResult out;
  out.kernel = fam.fields[0];
  out.mass = fam.mass[0];
  out.eps_error_l1 = fam.eps_error_l1;
  out.observed_order = fam.observed_order;
  out.eps_used = fam.eps_used;
  const RadialGrid& g = *grid;
  for (int i = 0; i < out.kernel.size(); ++i) {
    const double env = kernel_bound_envelope(t, g.center(i), g.dim(), g.lambda());
    out.fitted_c_delta = std::max(out.fitted_c_delta, out.kernel.values[i] / env);
  }
  return out;
}

struct SourceResult {
  Trajectory traj;
  Trajectory linear_twin;        // same grid, same final eps, no absorption
  double epsilon_achieved = 0.0;
  std::vector<double> eps_history;
  std::vector<double> eps_change;  // relative L1 change between levels
  bool converged = false;
  bool supercritical = false;
};

/// Relative change between two eps levels of a source run.  Below the
/// mollification scale the pointwise limit is a Dirac mass, so the L1 shape
/// comparison only applies to record times past that scale; the ball masses
/// over the configured rho list are the convergent quantity at earlier times
/// and are compared everywhere.
inline double eps_level_change(const Trajectory& fine, const Trajectory& coarse,
                               const std::vector<double>& rho_list,
                               double t_shape_floor) {
  double worst = 0.0;
  for (std::size_t j = 0; j < fine.snapshots.size(); ++j) {
    const RadialField& a = fine.snapshots[j];
    const RadialField& b = coarse.snapshots[j];
    for (double rho : rho_list) {
      const double ma = weighted_integral(a, rho);
      const double mb = weighted_integral(b, rho);
      worst = std::max(worst, std::abs(ma - mb) / std::max(ma, 1e-300));
    }
    if (a.time >= t_shape_floor) {
      const double num = weighted_l1_distance(a, b);
      const double den = weighted_l1_norm(a);
      worst = std::max(worst, num / std::max(den, 1e-300));
    }
  }
  return worst;
}

/// Singular source-type solution u_varkappa: semilinear evolution of the
/// mollified Dirac datum, with eps halved until successive solutions agree
/// to rel_tol at every record time (masses everywhere, L1 shape past the
/// mollification scale).
inline SourceResult source_solution(double varkappa, const ProblemParams& pr,
                                    const DerivedParams& d,
                                    std::shared_ptr<const RadialGrid> grid,
                                    const OperatorMatrix& A, EvolveConfig cfg,
                                    double eps0 = 0.1, int max_halvings = 6,
                                    double rel_tol = 1e-3,
                                    bool with_linear_twin = true) {
  require(!cfg.record_times.empty(), "BadConfig",
          "source_solution needs record times");
  SourceResult out;
  out.supercritical = !(pr.p < d.p_star);  // warn-and-proceed for sweeps

  std::optional<Trajectory> prev;
  double eps = eps0;
  for (int k = 0; k <= max_halvings; ++k, eps *= 0.5) {
    RadialField u0 = mollified_delta(grid, varkappa, eps);
    // The first steps must resolve the mollifier's diffusion scale eps^2,
    // or the eps-limit is polluted by a persistent initial-layer time error.
    EvolveConfig level_cfg = cfg;
    level_cfg.dt.dt0 = std::min(cfg.dt.dt0, 0.02 * eps * eps);
    Trajectory tr = evolve(u0, level_cfg, pr, d, A);
    tr.varkappa = varkappa;
    tr.epsilon = eps;
    out.eps_history.push_back(eps);
    if (max_halvings == 0) {  // fixed-eps run by explicit request
      out.traj = std::move(tr);
      out.epsilon_achieved = eps;
      out.converged = true;
      break;
    }
    if (prev) {
      const double t_floor = std::max(0.04 * cfg.t_end, 25.0 * eps * eps);
      const double worst = eps_level_change(tr, *prev, cfg.rho_list, t_floor);
      out.eps_change.push_back(worst);
      if (worst < rel_tol) {
        out.traj = std::move(tr);
        out.epsilon_achieved = eps;
        out.converged = true;
        break;
      }
    }
    prev = std::move(tr);
  }
  if (!out.converged) {
    if (out.supercritical) {  // no limit object exists; return finest iterate
      out.traj = std::move(*prev);
      out.epsilon_achieved = out.eps_history.back();
    } else {
      std::string hist;
      for (double c : out.eps_change) hist += std::to_string(c) + " ";
      fail("NotConverged",
           "eps-refinement stalled; relative changes: " + hist);
    }
  }
  if (with_linear_twin) {
    EvolveConfig lin = cfg;
    lin.linear_only = true;
    RadialField k0 = mollified_delta(grid, 1.0, out.epsilon_achieved);
    out.linear_twin = evolve(k0, lin, pr, d, A);
    out.linear_twin.varkappa = 1.0;
    out.linear_twin.epsilon = out.epsilon_achieved;
  }
  return out;
}

struct VssResult {
  Trajectory traj;
  double varkappa_reached = 0.0;
  bool saturated = false;
  std::vector<std::pair<double, double>> saturation_log;  // (varkappa, change)
  std::vector<double> eps_history;
};

/// Minimal VSS as the saturation limit of source solutions over
/// varkappa = 10, 100, ..., up to 1e8.
///
/// Each level runs at the fixed mollification width eps: for masses at or
/// beyond saturation the record-time solution forgets the datum's shape, and
/// the intrinsic eps-rate of the finite-mass construction (the bump loses the
/// mass fraction ~ varkappa^{p-1} eps^{2-(N+2λ)(p-1)} while collapsing) makes
/// per-level eps-refinement both pointless and unattainable at large mass.
/// The eps-quality of the limit is covered by rerunning the saturation at a
/// refined width.
inline VssResult vss_by_saturation(const ProblemParams& pr,
                                   const DerivedParams& d,
                                   std::shared_ptr<const RadialGrid> grid,
                                   const OperatorMatrix& A,
                                   const EvolveConfig& cfg, double eps = 0.05,
                                   double rel_tol = 2e-2) {
  require(pr.p < d.p_star, "InvalidParams",
          "very singular solutions exist only for p < p*");

  // Saturation is gauged at record times in the self-similar era: the mass
  // over small balls at t -> 0 diverges with varkappa by construction (that
  // is the very singularity being built), so early records cannot converge
  // along the ladder.
  EvolveConfig sat_cfg = cfg;
  sat_cfg.record_times.clear();
  for (double t : cfg.record_times)
    if (t >= 0.05 * cfg.t_end) sat_cfg.record_times.push_back(t);
  if (sat_cfg.record_times.empty()) sat_cfg.record_times = cfg.record_times;

  VssResult out;
  std::optional<Trajectory> prev;
  double vk_saturated = -1.0;
  for (double vk = 10.0; vk <= 1e8 + 1.0; vk *= 10.0) {
    SourceResult src = source_solution(vk, pr, d, grid, A, sat_cfg, eps,
                                       /*max_halvings=*/0, rel_tol,
                                       /*with_linear_twin=*/false);
    out.eps_history.push_back(src.epsilon_achieved);
    if (prev) {
      const double worst =
          eps_level_change(src.traj, *prev, cfg.rho_list, 0.0);
      out.saturation_log.emplace_back(vk, worst);
      if (worst < rel_tol) {
        vk_saturated = vk;
        break;
      }
    }
    prev = std::move(src.traj);
    out.varkappa_reached = vk;
  }

  out.saturated = vk_saturated > 0.0;
  if (out.saturated) out.varkappa_reached = vk_saturated;
  // Final pass at the reached mass with the caller's full record set (small
  // times included, for trace diagnostics).
  SourceResult fin =
      source_solution(out.varkappa_reached, pr, d, grid, A, cfg, eps,
                      /*max_halvings=*/0, rel_tol, /*with_linear_twin=*/false);
  out.traj = std::move(fin.traj);
  out.traj.saturated = out.saturated;
  return out;
}

} // namespace hardyheat
