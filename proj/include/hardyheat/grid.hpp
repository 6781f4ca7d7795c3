#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "hardyheat/error.hpp"

namespace hardyheat {

inline constexpr double kInfiniteRadius = std::numeric_limits<double>::infinity();

/// Surface area of the unit sphere in R^N.
inline double sphere_surface(int dim) {
  return 2.0 * std::pow(M_PI, 0.5 * dim) / std::tgamma(0.5 * dim);
}

namespace detail {

// 4-point Gauss-Legendre rule on [a,b].
template <class F>
double gauss4(const F& f, double a, double b) {
  static constexpr double x1 = 0.3399810435848563, x2 = 0.8611363115940526;
  static constexpr double w1 = 0.6521451548625461, w2 = 0.3478548451374538;
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  return h * (w1 * (f(c - h * x1) + f(c + h * x1)) +
              w2 * (f(c - h * x2) + f(c + h * x2)));
}

} // namespace detail

/// Cell-centered finite-volume mesh on [0, r_max] with graded faces
/// r_i = r_max * (i/n)^grading.  r = 0 is always a face, never a node, so the
/// singular densities r^{N-1+2*lambda} (and r^{-2}, r^{beta}) are only ever
/// integrated over cells or evaluated at positive centers.
class RadialGrid {
public:
  RadialGrid(double r_max, int n, double grading, double lambda, int dim)
      : r_max_(r_max), grading_(grading), lambda_(lambda), dim_(dim) {
    require(r_max > 0.0, "BadGrid", "r_max must be positive");
    require(n >= 16, "BadGrid", "need at least 16 cells");
    require(grading >= 1.0, "BadGrid", "grading exponent must be >= 1");
    require(dim >= 3, "BadGrid", "dimension must be >= 3");
    require(lambda > -0.5 * (dim - 2), "BadGrid",
            "lambda must exceed -(N-2)/2 for integrable weights");

    faces_.resize(n + 1);
    for (int i = 0; i <= n; ++i)
      faces_[i] = r_max * std::pow(double(i) / n, grading);
    faces_[0] = 0.0;
    faces_[n] = r_max;

    centers_.resize(n);
    w_mass_.resize(n);
    leb_mass_.resize(n);
    K_mass_.resize(n);
    for (int i = 0; i < n; ++i) {
      centers_[i] = 0.5 * (faces_[i] + faces_[i + 1]);
      w_mass_[i] = power_mass(faces_[i], faces_[i + 1], dim_ - 1 + 2.0 * lambda_);
      leb_mass_[i] = power_mass(faces_[i], faces_[i + 1], double(dim_ - 1));
      K_mass_[i] = detail::gauss4([this](double r) { return K_density(r); },
                                  faces_[i], faces_[i + 1]);
    }
    omega_ = sphere_surface(dim_);
  }

  int size() const { return int(centers_.size()); }
  double r_max() const { return r_max_; }
  double grading() const { return grading_; }
  double lambda() const { return lambda_; }
  int dim() const { return dim_; }
  double omega() const { return omega_; }

  double face(int i) const { return faces_[i]; }
  double center(int i) const { return centers_[i]; }
  const std::vector<double>& faces() const { return faces_; }
  const std::vector<double>& centers() const { return centers_; }

  /// Exact cell integral of the weighted density r^{N-1+2*lambda}.
  double cell_mass(int i) const { return w_mass_[i]; }
  /// Exact cell integral of r^{N-1}.
  double lebesgue_cell_mass(int i) const { return leb_mass_[i]; }
  /// Gauss cell integral of r^{N-1+2*lambda} e^{r^2/4}.
  double K_cell_mass(int i) const { return K_mass_[i]; }
  /// Exact cell integral of the Hardy potential density r^{N-3+2*lambda}
  /// (the weighted density times r^{-2}); integrable since N + 2*lambda > 2.
  double hardy_cell_mass(int i) const {
    return power_mass(faces_[i], faces_[i + 1], dim_ - 3 + 2.0 * lambda_);
  }

  /// Density r^{N-1+2*lambda} at a face or arbitrary radius (0 at r=0).
  double weight_at(double r) const {
    return r == 0.0 ? 0.0 : std::pow(r, dim_ - 1 + 2.0 * lambda_);
  }
  double K_density(double r) const {
    return r == 0.0 ? 0.0
                    : std::pow(r, dim_ - 1 + 2.0 * lambda_) * std::exp(0.25 * r * r);
  }

  /// ∫_a^b r^q dr for q > -1 (closed form).
  static double power_mass(double a, double b, double q) {
    const double e = q + 1.0;
    return (std::pow(b, e) - std::pow(a, e)) / e;
  }

  /// Partial mass of cell i truncated at radius rho in [face_i, face_{i+1}].
  double partial_mass(int i, double rho) const {
    return power_mass(faces_[i], rho, dim_ - 1 + 2.0 * lambda_);
  }
  double partial_lebesgue_mass(int i, double rho) const {
    return power_mass(faces_[i], rho, double(dim_ - 1));
  }
  double partial_K_mass(int i, double rho) const {
    return detail::gauss4([this](double r) { return K_density(r); }, faces_[i], rho);
  }

private:
  double r_max_, grading_, lambda_, omega_;
  int dim_;
  std::vector<double> faces_, centers_, w_mass_, leb_mass_, K_mass_;
};

inline std::shared_ptr<const RadialGrid> build_grid(double r_max, int n,
                                                    double grading, double lambda,
                                                    int dim) {
  return std::make_shared<const RadialGrid>(r_max, n, grading, lambda, dim);
}

enum class Frame { weighted, original };

/// Grid function at cell centers, tagged with variable frame and time.
struct RadialField {
  std::shared_ptr<const RadialGrid> grid;
  std::vector<double> values;
  Frame frame = Frame::weighted;
  double time = 0.0;

  RadialField() = default;
  RadialField(std::shared_ptr<const RadialGrid> g, Frame fr = Frame::weighted,
              double t = 0.0)
      : grid(std::move(g)), values(grid->size(), 0.0), frame(fr), time(t) {}

  int size() const { return int(values.size()); }
  double min() const { return *std::min_element(values.begin(), values.end()); }
  double max() const { return *std::max_element(values.begin(), values.end()); }

  template <class F>
  static RadialField of(std::shared_ptr<const RadialGrid> g, const F& f,
                        Frame fr = Frame::weighted, double t = 0.0) {
    RadialField u(std::move(g), fr, t);
    for (int i = 0; i < u.size(); ++i) u.values[i] = f(u.grid->center(i));
    return u;
  }
};

namespace detail {

template <class CellMass, class PartialMass>
double ball_integral(const RadialField& f, double rho, const CellMass& mass,
                     const PartialMass& partial) {
  const RadialGrid& g = *f.grid;
  if (std::isinf(rho)) rho = g.r_max();
  require(rho > 0.0 && rho <= g.r_max() + 1e-12 * g.r_max(), "OutOfRange",
          "integration radius outside grid extent");
  rho = std::min(rho, g.r_max());
  double sum = 0.0;
  for (int i = 0; i < g.size(); ++i) {
    if (g.face(i + 1) <= rho) {
      sum += f.values[i] * mass(i);
    } else {
      if (rho > g.face(i)) sum += f.values[i] * partial(i, rho);
      break;
    }
  }
  return g.omega() * sum;
}

} // namespace detail

/// ∫_{B_rho} f h^2 dx with h = r^lambda, for fields in the weighted frame.
inline double weighted_integral(const RadialField& f, double rho) {
  require(f.frame == Frame::weighted, "FrameMismatch",
          "weighted_integral expects a weighted-frame field");
  const RadialGrid& g = *f.grid;
  return detail::ball_integral(
      f, rho, [&](int i) { return g.cell_mass(i); },
      [&](int i, double r) { return g.partial_mass(i, r); });
}

/// ∫_{B_rho} f dx for fields in the original frame.
inline double lebesgue_integral(const RadialField& f, double rho) {
  require(f.frame == Frame::original, "FrameMismatch",
          "lebesgue_integral expects an original-frame field");
  const RadialGrid& g = *f.grid;
  return detail::ball_integral(
      f, rho, [&](int i) { return g.lebesgue_cell_mass(i); },
      [&](int i, double r) { return g.partial_lebesgue_mass(i, r); });
}

/// ∫_{B_rho} f K dx with K = r^{2*lambda} e^{r^2/4}; rho may be infinite
/// (truncated at the grid extent).
inline double K_integral(const RadialField& f, double rho = kInfiniteRadius) {
  const RadialGrid& g = *f.grid;
  return detail::ball_integral(
      f, rho, [&](int i) { return g.K_cell_mass(i); },
      [&](int i, double r) { return g.partial_K_mass(i, r); });
}

/// || f - g ||_{L^1_{h^2}} over the whole grid.
inline double weighted_l1_distance(const RadialField& a, const RadialField& b) {
  require(a.grid == b.grid && a.size() == b.size(), "GridMismatch",
          "fields live on different grids");
  const RadialGrid& g = *a.grid;
  double sum = 0.0;
  for (int i = 0; i < g.size(); ++i)
    sum += std::abs(a.values[i] - b.values[i]) * g.cell_mass(i);
  return g.omega() * sum;
}

inline double weighted_l1_norm(const RadialField& a) {
  const RadialGrid& g = *a.grid;
  double sum = 0.0;
  for (int i = 0; i < g.size(); ++i)
    sum += std::abs(a.values[i]) * g.cell_mass(i);
  return g.omega() * sum;
}

/// Linear interpolation of a field at radius r (constant beyond end centers).
inline double interpolate(const RadialField& f, double r) {
  const RadialGrid& g = *f.grid;
  if (r <= g.center(0)) return f.values[0];
  if (r >= g.center(g.size() - 1)) return f.values[g.size() - 1];
  int lo = int(std::lower_bound(g.centers().begin(), g.centers().end(), r) -
               g.centers().begin()) - 1;
  const double r0 = g.center(lo), r1 = g.center(lo + 1);
  const double w = (r - r0) / (r1 - r0);
  return (1.0 - w) * f.values[lo] + w * f.values[lo + 1];
}

} // namespace hardyheat
