#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "hardyheat/grid.hpp"
#include "hardyheat/model.hpp"
#include "hardyheat/operators.hpp"

namespace hardyheat {

/// Self-similar profile v(xi) of u(x,t) = t^{-sigma} v(x/sqrt(t)) in the
/// weighted frame, solving -K^{-1}(K v')' - sigma v + xi^beta v^p = 0 with
/// K = xi^{2*lambda} e^{xi^2/4}.
struct ProfileSolution {
  std::shared_ptr<const RadialGrid> grid;
  std::vector<double> v;
  double J_value = 0.0;
  double EL_residual_norm = 0.0;  // L^2_K norm of the discrete EL residual
  double decay_constant = 0.0;    // sup_{xi in [1, r_max]} v e^{xi^2/8}
  std::string method;             // "variational" or "shooting"
  double a_star = 0.0;            // shooting threshold v(0) (shooting only)
  int iterations = 0;
  double fitted_C_eps = 0.0;      // coercivity witness at eps = 1/2
  double value_at_origin = 0.0;
  // Dense integrator output (shooting only), up to the stitch radius.
  std::vector<double> dense_xi, dense_v, dense_dv;

  RadialField as_field() const {
    RadialField f(grid);
    f.values = v;
    return f;
  }
};

/// J(theta) = 1/2 ||grad theta||^2_{L2_K} + 1/(p+1) ||theta||^{p+1}_{L^{p+1}_{r^beta K}}
///            - mu/2 ||theta||^2_{L2_K},  mu defaulting to sigma.
inline double evaluate_J(const RadialField& theta, const ProblemParams& pr,
                         const DerivedParams& d, const OperatorMatrix& K,
                         double mu = -1.0) {
  if (mu < 0.0) mu = d.sigma;
  const RadialGrid& g = *theta.grid;
  double grad2 = K.flux_energy(theta.values, theta.values);
  double lp = 0.0, l2 = 0.0;
  for (int i = 0; i < g.size(); ++i) {
    const double th = std::abs(theta.values[i]);
    const double km = g.K_cell_mass(i);
    lp += std::pow(g.center(i), d.beta) * std::pow(th, pr.p + 1.0) * km;
    l2 += th * th * km;
  }
  return g.omega() * (0.5 * grad2 + lp / (pr.p + 1.0) - 0.5 * mu * l2);
}

namespace detail {

struct ElParts {
  std::vector<double> resid;  // strong form: -Lap_K v - sigma v + xi^beta v^p
  double norm = 0.0;          // L^2_K norm
};

inline ElParts el_residual(const std::vector<double>& v, const ProblemParams& pr,
                           const DerivedParams& d, const OperatorMatrix& K) {
  const RadialGrid& g = K.grid();
  ElParts out;
  out.resid = K.apply(v);
  double nrm = 0.0;
  for (int i = 0; i < K.size(); ++i) {
    const double ab = std::pow(g.center(i), d.beta) *
                      std::pow(std::abs(v[i]), pr.p - 1.0) * v[i];
    out.resid[i] = -out.resid[i] - d.sigma * v[i] + ab;
    nrm += out.resid[i] * out.resid[i] * g.K_cell_mass(i);
  }
  out.norm = std::sqrt(g.omega() * nrm);
  return out;
}

} // namespace detail

/// Descent on J with the Sobolev direction (-Lap_K + I)^{-1} grad J and
/// nonnegativity by absolute-value projection (J(theta) = J(|theta|)),
/// finished by Newton on the Euler-Lagrange system.  J never increases
/// across accepted iterates.
inline ProfileSolution minimize_J(const ProblemParams& pr, const DerivedParams& d,
                                  std::shared_ptr<const RadialGrid> grid,
                                  std::vector<double> init = {},
                                  int max_iter = 20000) {
  require(pr.p < d.p_star, "InvalidParams",
          "nontrivial minimizer requires p < p* (sigma > (N+2 lambda)/2)");
  const RadialGrid& g = *grid;
  const int n = g.size();
  OperatorMatrix K = assemble_K_laplacian(grid);

  RadialField theta(grid);
  if (!init.empty()) {
    require(int(init.size()) == n, "GridMismatch", "bad init size");
    theta.values = std::move(init);
    for (auto& x : theta.values) x = std::abs(x);
  } else {
    // tau-scan over the Gaussian trial function; J(tau phi) < 0 exists
    // because sigma > (N+2 lambda)/2.
    double best_J = 0.0, best_tau = 0.0;
    for (double tau = 0.05; tau <= 20.0; tau *= 1.15) {
      RadialField trial = RadialField::of(
          grid, [tau](double r) { return tau * std::exp(-0.25 * r * r); });
      const double Jt = evaluate_J(trial, pr, d, K);
      if (Jt < best_J) {
        best_J = Jt;
        best_tau = tau;
      }
    }
    require(best_J < 0.0, "TrivialMinimizer",
            "tau-scan found no negative J; p too close to p*?");
    theta = RadialField::of(grid, [best_tau](double r) {
      return best_tau * std::exp(-0.25 * r * r);
    });
  }

  ProfileSolution sol;
  sol.grid = grid;
  sol.method = "variational";

  double J = evaluate_J(theta, pr, d, K);
  double C_eps = -1e300;
  auto track_coercivity = [&](const std::vector<double>& v) {
    double l2 = 0.0, lp = 0.0;
    for (int i = 0; i < n; ++i) {
      const double km = g.K_cell_mass(i);
      l2 += v[i] * v[i] * km;
      lp += std::pow(g.center(i), d.beta) * std::pow(std::abs(v[i]), pr.p + 1.0) * km;
    }
    const double grad2 = K.flux_energy(v, v);
    C_eps = std::max(C_eps, g.omega() * (l2 - 0.5 * (grad2 + lp)));
  };
  track_coercivity(theta.values);

  const double J_rel_tol = 1e-12, resid_tol = 1e-6;
  bool converged = false;
  int it = 0;
  for (; it < max_iter && !converged; ++it) {
    detail::ElParts el = detail::el_residual(theta.values, pr, d, K);
    bool accepted = false;
    double dJ = 0.0;

    // Newton on the EL system once the residual is moderate; fall back to
    // the preconditioned descent step whenever it fails to decrease J.
    if (el.norm < 1e-1 * (1.0 + std::abs(J))) {
      std::vector<double> extra(n);
      for (int i = 0; i < n; ++i)
        extra[i] = pr.p * std::pow(g.center(i), d.beta) *
                       std::pow(std::abs(theta.values[i]), pr.p - 1.0) -
                   d.sigma;
      std::vector<double> neg(el.resid);
      for (auto& x : neg) x = -x;
      std::vector<double> delta;
      try {
        delta = K.solve_shifted(0.0, extra, neg);
      } catch (const Error&) {
        delta.clear();
      }
      if (!delta.empty()) {
        RadialField trial = theta;
        for (int i = 0; i < n; ++i)
          trial.values[i] = std::abs(theta.values[i] + delta[i]);
        const double Jt = evaluate_J(trial, pr, d, K);
        if (Jt <= J + 1e-15 * (1.0 + std::abs(J))) {
          dJ = J - Jt;
          theta = std::move(trial);
          J = Jt;
          accepted = true;
        }
      }
    }
    if (!accepted) {
      std::vector<double> dir = K.solve_shifted(1.0, {}, el.resid);
      double slope = 0.0;  // <grad J, dir> in the K measure
      for (int i = 0; i < n; ++i)
        slope += el.resid[i] * dir[i] * g.K_cell_mass(i);
      slope *= g.omega();
      double s = 1.0;
      for (int k = 0; k < 60 && !accepted; ++k, s *= 0.5) {
        RadialField trial = theta;
        for (int i = 0; i < n; ++i)
          trial.values[i] = std::abs(theta.values[i] - s * dir[i]);
        const double Jt = evaluate_J(trial, pr, d, K);
        if (Jt <= J - 1e-4 * s * slope) {
          dJ = J - Jt;
          theta = std::move(trial);
          J = Jt;
          accepted = true;
        }
      }
      if (!accepted)
        fail("MaxIterations", "line search exhausted at J = " + std::to_string(J));
    }
    track_coercivity(theta.values);
    if (dJ <= J_rel_tol * (1.0 + std::abs(J)) &&
        detail::el_residual(theta.values, pr, d, K).norm < resid_tol)
      converged = true;
  }
  if (!converged) fail("MaxIterations", "descent did not converge");

  sol.iterations = it;
  sol.v = theta.values;
  sol.J_value = J;
  sol.EL_residual_norm = detail::el_residual(sol.v, pr, d, K).norm;
  sol.fitted_C_eps = C_eps;
  sol.value_at_origin = sol.v[0];

  double vmax = 0.0;
  for (double x : sol.v) vmax = std::max(vmax, std::abs(x));
  require(vmax >= 1e-10, "TrivialMinimizer",
          "descent converged to zero; p >= p* or bad initial guess");
  require(J < 0.0, "TrivialMinimizer", "minimizer is not below J(0) = 0");

  double C = 0.0;
  for (int i = 0; i < n; ++i)
    if (g.center(i) >= 1.0)
      C = std::max(C, sol.v[i] * std::exp(g.center(i) * g.center(i) / 8.0));
  sol.decay_constant = C;
  require(std::isfinite(C), "DecayViolated", "decay constant is not finite");
  return sol;
}

namespace detail {

enum class ShotClass { sign_change, envelope_violation, decays };

struct ShotOutcome {
  ShotClass cls = ShotClass::decays;
  std::vector<double> on_centers;  // v sampled at grid centers (may be partial)
  double last_xi = 0.0;
  std::vector<double> dense_xi, dense_v, dense_dv;  // filled on request
};

/// RK4 integration of v'' + ((N-1+2λ)/xi + xi/2) v' + sigma v - xi^beta v^p = 0
/// from the first cell center with v = a, v' = 0.
inline ShotOutcome shoot_once(double a, const ProblemParams& pr,
                              const DerivedParams& d, const RadialGrid& g,
                              double envelope_factor = 10.0,
                              bool dense = false) {
  const double dcoef = g.dim() - 1 + 2.0 * g.lambda();
  auto rhs = [&](double xi, double v, double s, double& dv, double& ds) {
    dv = s;
    ds = -(dcoef / xi + 0.5 * xi) * s - d.sigma * v +
         std::pow(xi, d.beta) * std::pow(std::abs(v), pr.p - 1.0) * v;
  };

  ShotOutcome out;
  out.on_centers.assign(g.size(), 0.0);
  double xi = g.center(0), v = a, s = 0.0;
  out.on_centers[0] = a;
  int next_center = 1;
  double w_ref = a * std::exp(xi * xi / 8.0);
  if (dense) {
    out.dense_xi.push_back(xi);
    out.dense_v.push_back(v);
    out.dense_dv.push_back(s);
  }

  const double xi_end = g.r_max();
  while (xi < xi_end) {
    double h = std::min({1e-3, 0.05 * xi + 1e-6, xi_end - xi});
    double k1v, k1s, k2v, k2s, k3v, k3s, k4v, k4s;
    rhs(xi, v, s, k1v, k1s);
    rhs(xi + 0.5 * h, v + 0.5 * h * k1v, s + 0.5 * h * k1s, k2v, k2s);
    rhs(xi + 0.5 * h, v + 0.5 * h * k2v, s + 0.5 * h * k2s, k3v, k3s);
    rhs(xi + h, v + h * k3v, s + h * k3s, k4v, k4s);
    const double v_new = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    const double s_new = s + h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
    const double xi_new = xi + h;

    while (next_center < g.size() && g.center(next_center) <= xi_new) {
      const double w = (g.center(next_center) - xi) / h;
      out.on_centers[next_center] = (1.0 - w) * v + w * v_new;
      ++next_center;
    }
    xi = xi_new;
    v = v_new;
    s = s_new;
    out.last_xi = xi;
    if (dense) {
      out.dense_xi.push_back(xi);
      out.dense_v.push_back(v);
      out.dense_dv.push_back(s);
    }

    if (!std::isfinite(v) || v < 0.0) {
      out.cls = ShotClass::sign_change;
      if (!std::isfinite(v)) out.cls = ShotClass::envelope_violation;
      return out;
    }
    const double w_now = v * std::exp(xi * xi / 8.0);
    if (xi <= 2.0) {
      w_ref = std::max(w_ref, w_now);
    } else if (w_now > envelope_factor * w_ref) {
      out.cls = ShotClass::envelope_violation;
      return out;
    }
  }
  out.cls = ShotClass::decays;
  return out;
}

} // namespace detail

/// Shooting construction of the profile: classify the initial height a by
/// terminal behavior (sign change for small a, failure to stay inside the
/// e^{-xi^2/8} envelope for large a) and bisect to the threshold.  Beyond the
/// radius where the bisection width no longer controls the growing mode, the
/// profile is continued with the decaying far-field asymptotic
/// xi^{2 sigma - (N+2λ)} e^{-xi^2/4}.
inline ProfileSolution shoot_profile(const ProblemParams& pr,
                                     const DerivedParams& d,
                                     std::shared_ptr<const RadialGrid> grid,
                                     double bisect_width = 1e-12) {
  require(pr.p < d.p_star, "InvalidParams", "profile requires p < p*");
  const RadialGrid& g = *grid;

  // Bracket: scan a in [1e-6, 1e3] for the sign-change/envelope transition.
  double a_lo = 0.0, a_hi = 0.0;
  detail::ShotClass prev_cls{};
  double prev_a = 0.0;
  bool have_prev = false;
  for (double a = 1e-6; a <= 1e3; a *= 2.0) {
    auto res = detail::shoot_once(a, pr, d, g);
    if (have_prev && res.cls != prev_cls &&
        (prev_cls == detail::ShotClass::sign_change ||
         res.cls == detail::ShotClass::sign_change)) {
      a_lo = prev_a;
      a_hi = a;
      break;
    }
    prev_cls = res.cls;
    prev_a = a;
    have_prev = true;
  }
  require(a_hi > 0.0, "BracketNotFound",
          "no classification change for a in [1e-6, 1e3]");

  const bool lo_is_sign =
      detail::shoot_once(a_lo, pr, d, g).cls == detail::ShotClass::sign_change;
  while (a_hi - a_lo > bisect_width) {
    const double mid = 0.5 * (a_lo + a_hi);
    const bool mid_sign =
        detail::shoot_once(mid, pr, d, g).cls == detail::ShotClass::sign_change;
    if (mid_sign == lo_is_sign)
      a_lo = mid;
    else
      a_hi = mid;
  }
  const double a_star = 0.5 * (a_lo + a_hi);
  auto final_shot = detail::shoot_once(a_star, pr, d, g, 10.0, /*dense=*/true);

  ProfileSolution sol;
  sol.grid = grid;
  sol.method = "shooting";
  sol.a_star = a_star;
  sol.v = final_shot.on_centers;
  sol.value_at_origin = a_star;

  // Trustworthy radius: the unstable mode grows like e^{xi^2/2} relative to
  // the profile, so the bisection width delta controls xi^2 < 2 ln(a*/delta).
  const double xi_cut =
      0.9 * std::sqrt(2.0 * std::log(a_star / bisect_width + 10.0));
  int i_cut = 0;
  while (i_cut + 1 < g.size() && g.center(i_cut + 1) <= std::min(xi_cut, final_shot.last_xi))
    ++i_cut;
  const double d_eff = g.dim() + 2.0 * g.lambda();
  const double vc = std::max(sol.v[i_cut], 1e-300), xc = g.center(i_cut);
  for (int i = i_cut + 1; i < g.size(); ++i) {
    const double xi = g.center(i);
    sol.v[i] = vc * std::pow(xi / xc, 2.0 * d.sigma - d_eff) *
               std::exp(-(xi * xi - xc * xc) / 4.0);
  }
  for (auto& x : sol.v) x = std::max(x, 0.0);

  for (std::size_t k = 0; k < final_shot.dense_xi.size(); ++k) {
    if (final_shot.dense_xi[k] > xc) break;
    sol.dense_xi.push_back(final_shot.dense_xi[k]);
    sol.dense_v.push_back(final_shot.dense_v[k]);
    sol.dense_dv.push_back(final_shot.dense_dv[k]);
  }

  double C = 0.0;
  for (int i = 0; i < g.size(); ++i)
    if (g.center(i) >= 1.0)
      C = std::max(C, sol.v[i] * std::exp(g.center(i) * g.center(i) / 8.0));
  sol.decay_constant = C;

  OperatorMatrix K = assemble_K_laplacian(grid);
  sol.EL_residual_norm = detail::el_residual(sol.v, pr, d, K).norm;
  RadialField f = sol.as_field();
  sol.J_value = evaluate_J(f, pr, d, K);
  return sol;
}

/// Weak-form residual of the profile ODE for an externally produced profile,
/// tested against hat functions on a fine uniform grid with per-interval
/// Gauss quadrature; independent of the finite-volume stencil.
inline double weak_form_residual(const std::function<double(double)>& v,
                                 const std::function<double(double)>& dv,
                                 const ProblemParams& pr, const DerivedParams& d,
                                 double lambda, int dim, double xi_max,
                                 int n_hats = 800) {
  const double h = xi_max / (n_hats + 1);
  auto Kd = [&](double r) {
    return std::pow(r, dim - 1 + 2.0 * lambda) * std::exp(0.25 * r * r);
  };
  double norm2 = 0.0, mass2 = 0.0;
  for (int j = 1; j <= n_hats; ++j) {
    const double xj = j * h;
    auto hat = [&](double x) { return 1.0 - std::abs(x - xj) / h; };
    auto dhat = [&](double x) { return x < xj ? 1.0 / h : -1.0 / h; };
    auto integrand = [&](double x) {
      const double ab = std::pow(x, d.beta) *
                        std::pow(std::abs(v(x)), pr.p - 1.0) * v(x);
      return (dv(x) * dhat(x) + (ab - d.sigma * v(x)) * hat(x)) * Kd(x);
    };
    const double R = detail::gauss4(integrand, xj - h, xj) +
                     detail::gauss4(integrand, xj, xj + h);
    double m = 0.0;  // hat mass in the K measure, for scaling
    m = detail::gauss4(Kd, xj - h, xj + h);
    norm2 += R * R / std::max(m, 1e-300);
    mass2 += m;
  }
  (void)mass2;
  return std::sqrt(norm2);
}

struct DecayReport {
  double C = 0.0;                  // sup_{[1, r_max]} v e^{xi^2/8}
  std::vector<double> envelope;    // v e^{xi^2/8} at centers in [1, r_max]
  bool violated = false;
};

/// Certify the Gaussian decay v <= C e^{-xi^2/8}: the rescaled profile must
/// stay bounded and must not grow monotonically across the last quarter of
/// the domain.
inline DecayReport check_decay(const ProfileSolution& sol) {
  const RadialGrid& g = *sol.grid;
  require(g.r_max() >= 8.0, "BadGrid", "decay check needs r_max >= 8");
  DecayReport rep;
  std::vector<double> xs;
  for (int i = 0; i < g.size(); ++i) {
    if (g.center(i) < 1.0) continue;
    const double w = sol.v[i] * std::exp(g.center(i) * g.center(i) / 8.0);
    rep.envelope.push_back(w);
    rep.C = std::max(rep.C, w);
  }
  require(std::isfinite(rep.C), "DecayViolated", "rescaled profile overflows");

  const std::size_t m = rep.envelope.size();
  const std::size_t q = m - m / 4;
  bool all_up = m / 4 >= 2;
  for (std::size_t i = q; i + 1 < m; ++i)
    if (rep.envelope[i + 1] <= rep.envelope[i] * (1.0 + 1e-12)) {
      all_up = false;
      break;
    }
  rep.violated = all_up;
  if (rep.violated)
    fail("DecayViolated",
         "v e^{xi^2/8} grows monotonically over the last quarter of the domain");
  return rep;
}

} // namespace hardyheat
