#pragma once

#include <cmath>
#include <string>

#include "hardyheat/error.hpp"
#include "hardyheat/grid.hpp"

namespace hardyheat {

/// Parameters of u_t - Δu - kappa/r^2 u + r^alpha u|u|^{p-1} = 0 on R^N.
struct ProblemParams {
  int N = 3;
  double kappa = 0.0;
  double alpha = 0.0;
  double p = 1.5;

  double kappa_critical() const { return 0.25 * (N - 2) * (N - 2); }
};

/// Exponents of the transformed equation
/// u_t - r^{-2λ} div(r^{2λ} grad u) + r^beta u|u|^{p-1} = 0.
struct DerivedParams {
  double lambda = 0.0;       // larger root of λ^2 + λ(N-2) + kappa = 0
  double beta = 0.0;         // alpha + lambda (p-1)
  double sigma = 0.0;        // (2+beta) / (2(p-1)), self-similar decay rate
  double p_star = 0.0;       // 1 + (2+beta)/(N+2λ)
  double p_star_star = 0.0;  // 1 + (2+alpha)/(N+λ)
};

inline constexpr double kCriticalTieTol = 1e-12;

inline DerivedParams derive_params(const ProblemParams& pr) {
  require(pr.N >= 3, "InvalidParams", "dimension N must be >= 3");
  require(pr.kappa < pr.kappa_critical(), "InvalidParams",
          "kappa must be below the critical constant ((N-2)/2)^2 = " +
              std::to_string(pr.kappa_critical()));
  require(pr.alpha > -2.0, "InvalidParams", "alpha must exceed -2");
  require(pr.p > 1.0, "InvalidParams", "absorption power p must exceed 1");

  const double half = 0.5 * (pr.N - 2);
  DerivedParams d;
  d.lambda = -half + std::sqrt(half * half - pr.kappa);
  d.beta = pr.alpha + d.lambda * (pr.p - 1.0);
  require(d.beta > -2.0, "InvalidParams",
          "beta = alpha + lambda (p-1) = " + std::to_string(d.beta) +
              " is not above -2");
  d.sigma = (2.0 + d.beta) / (2.0 * (pr.p - 1.0));
  d.p_star = 1.0 + (2.0 + d.beta) / (pr.N + 2.0 * d.lambda);
  d.p_star_star = 1.0 + (2.0 + pr.alpha) / (pr.N + d.lambda);

  // Residual guards against cancellation near the critical kappa.
  const double indicial = d.lambda * d.lambda + d.lambda * (pr.N - 2) + pr.kappa;
  require(std::abs(indicial) <= 1e-10 * (1.0 + std::abs(pr.kappa)),
          "InvalidParams", "indicial residual too large (cancellation)");
  const bool sub_w = pr.p < d.p_star - kCriticalTieTol;
  const bool sub_o = pr.p < d.p_star_star - kCriticalTieTol;
  require(sub_w == sub_o, "InvalidParams",
          "criticality tests via p* and p** disagree");
  return d;
}

/// The smaller indicial root is never used by the theory; provided only so a
/// caller asking for it gets a clear refusal.
inline double lambda_smaller_root(const ProblemParams& pr) {
  (void)pr;
  fail("InvalidParams",
       "the smaller root -(N-2)/2 - sqrt(((N-2)/2)^2 - kappa) does not give a "
       "positive ground state in H^1_loc; only the larger root is supported");
}

/// Ground-state transform: weighted variable = u / r^lambda, nodewise.
inline RadialField to_weighted(const RadialField& u, double lambda) {
  require(u.frame == Frame::original, "FrameMismatch",
          "to_weighted expects an original-frame field");
  RadialField out = u;
  out.frame = Frame::weighted;
  if (lambda == 0.0) return out;
  for (int i = 0; i < u.size(); ++i)
    out.values[i] = u.values[i] * std::pow(u.grid->center(i), -lambda);
  return out;
}

inline RadialField from_weighted(const RadialField& u, double lambda) {
  require(u.frame == Frame::weighted, "FrameMismatch",
          "from_weighted expects a weighted-frame field");
  RadialField out = u;
  out.frame = Frame::original;
  if (lambda == 0.0) return out;
  for (int i = 0; i < u.size(); ++i)
    out.values[i] = u.values[i] * std::pow(u.grid->center(i), lambda);
  return out;
}

enum class Criticality { subcritical, critical, supercritical };

/// Lebesgue-mass behavior of the VSS as t -> 0 (original variables).
enum class MassSubregime {
  not_applicable,  // no VSS (critical or supercritical p)
  classical,       // kappa = 0: Lebesgue and weighted masses coincide
  diverges,        // ∫_{B_rho} u_inf dx -> infinity
  vanishes,        // -> 0 although the solution is nontrivial (non-uniqueness)
  finite_delta     // -> finite c independent of rho (datum c δ_0)
};

struct RegimeReport {
  Criticality criticality = Criticality::subcritical;
  MassSubregime subregime = MassSubregime::not_applicable;
  bool singular_solutions_exist = false;
  double p_star = 0.0;
  double p_star_star = 0.0;
  /// Threshold 1 + (2+alpha)/N separating vanishing from diverging
  /// Lebesgue mass when kappa > 0.
  double p_mass_threshold = 0.0;
  /// Reference slope N/2 - (2+alpha)/(2(p-1)) of log ∫_{B_rho} u_inf dx
  /// against log t.
  double mass_slope = 0.0;

  std::string criticality_name() const {
    switch (criticality) {
      case Criticality::subcritical: return "subcritical";
      case Criticality::critical: return "critical";
      default: return "supercritical";
    }
  }
  std::string subregime_name() const {
    switch (subregime) {
      case MassSubregime::classical: return "classical";
      case MassSubregime::diverges: return "lebesgue-mass-diverges";
      case MassSubregime::vanishes: return "lebesgue-mass-vanishes";
      case MassSubregime::finite_delta: return "lebesgue-mass-finite";
      default: return "none";
    }
  }
};

inline RegimeReport classify_regime(const ProblemParams& pr,
                                    const DerivedParams& d) {
  RegimeReport rep;
  rep.p_star = d.p_star;
  rep.p_star_star = d.p_star_star;
  rep.p_mass_threshold = 1.0 + (2.0 + pr.alpha) / pr.N;
  rep.mass_slope = 0.5 * pr.N - (2.0 + pr.alpha) / (2.0 * (pr.p - 1.0));

  if (std::abs(pr.p - d.p_star) <= kCriticalTieTol)
    rep.criticality = Criticality::critical;
  else if (pr.p < d.p_star)
    rep.criticality = Criticality::subcritical;
  else
    rep.criticality = Criticality::supercritical;

  rep.singular_solutions_exist = rep.criticality == Criticality::subcritical;
  if (!rep.singular_solutions_exist) {
    rep.subregime = MassSubregime::not_applicable;
    return rep;
  }
  if (pr.kappa == 0.0) {
    rep.subregime = MassSubregime::classical;
  } else if (pr.kappa < 0.0) {
    rep.subregime = MassSubregime::diverges;
  } else if (std::abs(pr.p - rep.p_mass_threshold) <= kCriticalTieTol) {
    rep.subregime = MassSubregime::finite_delta;
  } else {
    rep.subregime = pr.p > rep.p_mass_threshold ? MassSubregime::vanishes
                                                : MassSubregime::diverges;
  }
  return rep;
}

} // namespace hardyheat
