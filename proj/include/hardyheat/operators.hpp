#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "hardyheat/grid.hpp"
#include "hardyheat/model.hpp"

namespace hardyheat {

/// Solve a tridiagonal system in place; sub[0] and super[n-1] are ignored.
inline std::vector<double> thomas_solve(const std::vector<double>& sub,
                                        const std::vector<double>& diag,
                                        const std::vector<double>& super,
                                        std::vector<double> rhs) {
  const int n = int(rhs.size());
  std::vector<double> c(n);
  double piv = diag[0];
  require(piv != 0.0, "SingularMatrix", "zero pivot in tridiagonal solve");
  c[0] = super[0] / piv;
  rhs[0] /= piv;
  for (int i = 1; i < n; ++i) {
    piv = diag[i] - sub[i] * c[i - 1];
    require(piv != 0.0, "SingularMatrix", "zero pivot in tridiagonal solve");
    c[i] = super[i] / piv;
    rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / piv;
  }
  for (int i = n - 2; i >= 0; --i) rhs[i] -= c[i] * rhs[i + 1];
  return rhs;
}

enum class MeasureKind { weighted, K };

/// Conservative finite-volume form of the measure-weighted Laplacian
/// w^{-1} d/dr ( w du/dr ) with density w = r^{N-1+2λ} (or the K density),
/// zero flux through the r=0 face and a Dirichlet-zero ghost at r_max.
/// Row form: (Au)_i = sub_i u_{i-1} + diag_i u_i + super_i u_{i+1}.
class OperatorMatrix {
public:
  OperatorMatrix(std::shared_ptr<const RadialGrid> grid, MeasureKind kind)
      : grid_(std::move(grid)), kind_(kind) {
    const RadialGrid& g = *grid_;
    const int n = g.size();
    sub_.assign(n, 0.0);
    diag_.assign(n, 0.0);
    super_.assign(n, 0.0);
    mass_.resize(n);
    for (int i = 0; i < n; ++i)
      mass_[i] = kind_ == MeasureKind::weighted ? g.cell_mass(i) : g.K_cell_mass(i);

    // Harmonic transmissibility 1 / ∫ dr / w(r) between neighbouring centers:
    // exact for w-harmonic profiles, which keeps the discrete Hardy quotient
    // consistent on the log-coarse cells next to the origin.  Face 0 stays 0
    // (zero flux through r = 0).
    face_coef_.assign(n + 1, 0.0);
    for (int i = 1; i < n; ++i)
      face_coef_[i] = transmissibility(g.center(i - 1), g.center(i));
    face_coef_[n] = transmissibility(g.center(n - 1), g.r_max());

    ghost_.assign(n, 0.0);
    ghost_[n - 1] = face_coef_[n] / mass_[n - 1];
    for (int i = 0; i < n; ++i) {
      if (i > 0) sub_[i] = face_coef_[i] / mass_[i];
      if (i + 1 < n) super_[i] = face_coef_[i + 1] / mass_[i];
      diag_[i] = -(sub_[i] + super_[i] + ghost_[i]);
    }
  }

  const RadialGrid& grid() const { return *grid_; }
  std::shared_ptr<const RadialGrid> grid_ptr() const { return grid_; }
  int size() const { return int(mass_.size()); }
  MeasureKind kind() const { return kind_; }
  double sub(int i) const { return sub_[i]; }
  double diag(int i) const { return diag_[i]; }
  double super(int i) const { return super_[i]; }
  double mass(int i) const { return mass_[i]; }

  /// Flux-difference form: constants are annihilated exactly on interior rows.
  std::vector<double> apply(const std::vector<double>& u) const {
    const int n = size();
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) {
      double s = -ghost_[i] * u[i];
      if (i > 0) s += sub_[i] * (u[i - 1] - u[i]);
      if (i + 1 < n) s += super_[i] * (u[i + 1] - u[i]);
      out[i] = s;
    }
    return out;
  }

  RadialField apply(const RadialField& u) const {
    RadialField out = u;
    out.values = apply(u.values);
    return out;
  }

  /// <Au, v> with the operator's measure (no sphere factor); compensated
  /// summation so the weighted-symmetry identity is testable at 1e-13.
  double inner(const std::vector<double>& au, const std::vector<double>& v) const {
    double s = 0.0, c = 0.0;
    for (int i = 0; i < size(); ++i) {
      const double term = au[i] * v[i] * mass_[i] - c;
      const double t = s + term;
      c = (t - s) - term;
      s = t;
    }
    return s;
  }

  /// Dirichlet form <-Au, v>: sum of face fluxes plus the outer ghost term.
  double flux_energy(const std::vector<double>& u,
                     const std::vector<double>& v) const {
    const int n = size();
    double s = 0.0;
    for (int i = 1; i < n; ++i)
      s += face_coef_[i] * (u[i] - u[i - 1]) * (v[i] - v[i - 1]);
    s += face_coef_[n] * u[n - 1] * v[n - 1];
    return s;
  }

  /// Solve (a I - A + diag(extra)) x = rhs, the Newton/implicit-step system.
  std::vector<double> solve_shifted(double a, const std::vector<double>& extra,
                                    const std::vector<double>& rhs) const {
    const int n = size();
    std::vector<double> d(n), s(n), p(n);
    for (int i = 0; i < n; ++i) {
      d[i] = a - diag_[i] + (extra.empty() ? 0.0 : extra[i]);
      s[i] = -sub_[i];
      p[i] = -super_[i];
    }
    return thomas_solve(s, d, p, rhs);
  }

private:
  double transmissibility(double a, double b) const {
    if (kind_ == MeasureKind::weighted) {
      const double q = grid_->dim() - 1 + 2.0 * grid_->lambda();  // q > 1
      return (q - 1.0) /
             (std::pow(a, 1.0 - q) - std::pow(b, 1.0 - q));
    }
    const double recip = detail::gauss4(
        [this](double r) { return 1.0 / grid_->K_density(r); }, a, b);
    return 1.0 / recip;
  }

  std::shared_ptr<const RadialGrid> grid_;
  MeasureKind kind_;
  std::vector<double> sub_, diag_, super_, mass_, face_coef_, ghost_;
};

inline OperatorMatrix assemble_laplacian(std::shared_ptr<const RadialGrid> grid) {
  return OperatorMatrix(std::move(grid), MeasureKind::weighted);
}

/// K-weighted Laplacian K^{-1} div(K grad .) used by the profile equation.
inline OperatorMatrix assemble_K_laplacian(std::shared_ptr<const RadialGrid> grid) {
  return OperatorMatrix(std::move(grid), MeasureKind::K);
}

/// Nodewise absorption r^beta |u|^{p-1} u.
inline RadialField absorption(const RadialField& u, double beta, double p) {
  RadialField out = u;
  for (int i = 0; i < u.size(); ++i) {
    const double r = u.grid->center(i), v = u.values[i];
    out.values[i] = std::pow(r, beta) * std::pow(std::abs(v), p - 1.0) * v;
  }
  return out;
}

/// Minimum of the discrete Hardy Rayleigh quotient over grid functions
/// vanishing at the outer boundary, by inverse power iteration on the
/// tridiagonal pencil (-A) u = mu B u.
///
/// Both sides of the quotient are exact integrals of the same trial
/// function: the w-harmonic interpolant between cell centers (constant
/// inside the first half cell).  The energy is then exactly the harmonic
/// transmissibility form of the operator and B is the exact r^{-2}-weighted
/// mass matrix on that trial space, so the minimum is a Ritz upper bound
/// for the continuum constant ((N-2+2λ)/2)^2 and approaches it from above.
inline double hardy_rayleigh_min(const RadialGrid& grid, int max_iter = 10000,
                                 double tol = 1e-10) {
  auto gp = std::make_shared<const RadialGrid>(grid);
  OperatorMatrix A(gp, MeasureKind::weighted);
  const int n = grid.size();
  const double d = grid.dim() + 2.0 * grid.lambda();  // effective dimension > 2

  // Per-segment mass form of the harmonic interpolant A + B r^{2-d} against
  // the density r^{d-3}: closed-form power integrals.
  std::vector<double> b_diag(n, 0.0), b_off(n, 0.0);  // off[i]: (i-1, i)
  b_diag[0] += std::pow(grid.center(0), d - 2.0) / (d - 2.0);
  auto segment = [&](double x, double y, double& q11, double& q12, double& q22) {
    const double px = std::pow(x, 2.0 - d), py = std::pow(y, 2.0 - d);
    const double I0 = (std::pow(y, d - 2.0) - std::pow(x, d - 2.0)) / (d - 2.0);
    const double I1 = std::log(y / x);
    const double I2 = (px - py) / (d - 2.0);
    const double den = px - py;
    // u(r) = Acoef + Bcoef r^{2-d} with u(x) = u1, u(y) = u2:
    //   Bcoef = (u1 - u2)/den, Acoef = u1 - Bcoef px.
    // Quadratic form of I0 Acoef^2 + 2 I1 Acoef Bcoef + I2 Bcoef^2 in (u1, u2).
    const double dB1 = 1.0 / den, dB2 = -1.0 / den;
    const double dA1 = 1.0 - dB1 * px, dA2 = -dB2 * px;
    q11 = I0 * dA1 * dA1 + 2.0 * I1 * dA1 * dB1 + I2 * dB1 * dB1;
    q12 = I0 * dA1 * dA2 + I1 * (dA1 * dB2 + dA2 * dB1) + I2 * dB1 * dB2;
    q22 = I0 * dA2 * dA2 + 2.0 * I1 * dA2 * dB2 + I2 * dB2 * dB2;
  };
  for (int i = 0; i + 1 < n; ++i) {
    double q11, q12, q22;
    segment(grid.center(i), grid.center(i + 1), q11, q12, q22);
    b_diag[i] += q11;
    b_diag[i + 1] += q22;
    b_off[i + 1] += q12;
  }
  {
    double q11, q12, q22;  // outer segment down to the Dirichlet zero
    segment(grid.center(n - 1), grid.r_max(), q11, q12, q22);
    b_diag[n - 1] += q11;
  }
  auto b_apply = [&](const std::vector<double>& u) {
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) {
      double s = b_diag[i] * u[i];
      if (i > 0) s += b_off[i] * u[i - 1];
      if (i + 1 < n) s += b_off[i + 1] * u[i + 1];
      out[i] = s;
    }
    return out;
  };

  std::vector<double> u(n, 1.0);
  double mu_prev = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    std::vector<double> rhs = b_apply(u);
    for (int i = 0; i < n; ++i) rhs[i] /= A.mass(i);  // row form of the pencil
    u = A.solve_shifted(0.0, {}, rhs);
    double norm = 0.0;
    for (int i = 0; i < n; ++i) norm = std::max(norm, std::abs(u[i]));
    for (auto& x : u) x /= norm;
    const double num = A.flux_energy(u, u);
    std::vector<double> bu = b_apply(u);
    double den = 0.0;
    for (int i = 0; i < n; ++i) den += bu[i] * u[i];
    const double mu = num / den;
    if (it > 0 && std::abs(mu - mu_prev) <= tol * std::abs(mu)) return mu;
    mu_prev = mu;
  }
  fail("ConvergenceFailure", "Hardy inverse power iteration stalled");
}

struct HardyKReport {
  double lhs = 0.0;   // ∫ |grad θ|^2 K dx (discrete)
  double rhs = 0.0;   // ∫ (r^2/16 + (N+2λ)/4 + ((N-2+2λ)/2)^2 / r^2) θ^2 K dx
  bool holds = false; // lhs >= rhs (1 - tol)
  double tol = 0.0;
};

/// Check the K-weighted Hardy inequality (a = 1/4 in K = r^{2λ} e^{a r^2})
/// on a concrete test function.
inline HardyKReport hardy_K_inequality_check(std::shared_ptr<const RadialGrid> grid,
                                             double lambda,
                                             const RadialField& theta,
                                             double tol = 1e-2) {
  const RadialGrid& g = *grid;
  require(std::abs(lambda - g.lambda()) < 1e-14, "GridMismatch",
          "grid was built for a different lambda");
  OperatorMatrix K(grid, MeasureKind::K);
  HardyKReport rep;
  rep.tol = tol;
  rep.lhs = g.omega() * K.flux_energy(theta.values, theta.values);
  const int N = g.dim();
  const double c2 = 0.25 * (N - 2 + 2.0 * lambda) * (N - 2 + 2.0 * lambda);
  double rhs = 0.0;
  for (int i = 0; i < g.size(); ++i) {
    const double r = g.center(i);
    const double pot = r * r / 16.0 + 0.25 * (N + 2.0 * lambda) + c2 / (r * r);
    rhs += pot * theta.values[i] * theta.values[i] * g.K_cell_mass(i);
  }
  rep.rhs = g.omega() * rhs;
  rep.holds = rep.lhs >= rep.rhs * (1.0 - tol);
  return rep;
}

/// Discrete residual of the weighted equation between two states:
/// (u_next - u_prev)/dt - A u_next + r^beta |u_next|^{p-1} u_next.
inline RadialField pde_residual(const RadialField& u_prev,
                                const RadialField& u_next, double dt,
                                double beta, double p, const OperatorMatrix& A) {
  require(u_prev.grid == u_next.grid, "GridMismatch",
          "residual needs both states on one grid");
  RadialField res = u_next;
  const auto au = A.apply(u_next.values);
  const RadialField absorb = absorption(u_next, beta, p);
  for (int i = 0; i < res.size(); ++i)
    res.values[i] =
        (u_next.values[i] - u_prev.values[i]) / dt - au[i] + absorb.values[i];
  return res;
}

} // namespace hardyheat
