#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "hardyheat/operators.hpp"

using namespace hardyheat;

namespace {

// Deterministic uniform doubles in [lo, hi); distribution-free so results do
// not depend on the standard library.
struct Rng {
  std::mt19937_64 gen;
  explicit Rng(unsigned long long seed) : gen(seed) {}
  double uniform(double lo = 0.0, double hi = 1.0) {
    return lo + (hi - lo) * double(gen() >> 11) * 0x1.0p-53;
  }
};

} // namespace

TEST_CASE("weighted Laplacian structure") {
  auto grid = build_grid(8.0, 256, 2.0, 0.25, 3);
  OperatorMatrix A = assemble_laplacian(grid);

  SECTION("constants are harmonic away from the outer boundary") {
    std::vector<double> one(grid->size(), 1.0);
    auto au = A.apply(one);
    for (int i = 0; i + 1 < grid->size(); ++i)
      CHECK(std::abs(au[i]) <= 1e-12);
    CHECK(au[grid->size() - 1] < 0.0);  // Dirichlet ghost pulls down
  }

  SECTION("weighted symmetry sub_i m_i = super_{i-1} m_{i-1}") {
    for (int i = 1; i < grid->size(); ++i)
      CHECK(A.sub(i) * A.mass(i) ==
            Catch::Approx(A.super(i - 1) * A.mass(i - 1)).epsilon(1e-13));
  }

  SECTION("symmetry and nonpositivity of the form on random fields") {
    Rng rng(42);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> u(grid->size()), v(grid->size());
      for (auto& x : u) x = rng.uniform(-1.0, 1.0);
      for (auto& x : v) x = rng.uniform(-1.0, 1.0);
      const double auv = A.inner(A.apply(u), v);
      const double avu = A.inner(A.apply(v), u);
      const double scale = std::max(std::abs(auv), std::abs(avu)) + 1.0;
      CHECK(std::abs(auv - avu) <= 1e-12 * scale);
      CHECK(A.inner(A.apply(u), u) <= 1e-12 * scale);
    }
  }

  SECTION("discrete Green identity with the flux energy") {
    Rng rng(7);
    std::vector<double> u(grid->size()), v(grid->size());
    for (auto& x : u) x = rng.uniform(-1.0, 1.0);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    const double lhs = -A.inner(A.apply(u), v);
    const double rhs = A.flux_energy(u, v);
    CHECK(lhs == Catch::Approx(rhs).epsilon(1e-12));
  }

  SECTION("interior consistency: Lap r^2 -> 2N + 4 lambda") {
    // For the weighted operator, A r^2 = 2 (N + 2 lambda) exactly in the
    // continuum; check interior convergence under refinement.
    double prev = 0.0;
    for (int n : {128, 256, 512}) {
      auto g = build_grid(8.0, n, 2.0, 0.25, 3);
      OperatorMatrix An = assemble_laplacian(g);
      std::vector<double> u(g->size());
      for (int i = 0; i < g->size(); ++i)
        u[i] = g->center(i) * g->center(i);
      auto au = An.apply(u);
      const int probe = n / 2;
      const double target = 2.0 * (3.0 + 2.0 * 0.25);
      const double err = std::abs(au[probe] - target);
      if (prev > 0.0) CHECK(err < prev);
      prev = err;
      if (n == 512) CHECK(err <= 0.05);
    }
  }
}

TEST_CASE("classical Laplacian of r^2 is 2N at lambda = 0") {
  auto grid = build_grid(4.0, 512, 1.5, 0.0, 3);
  OperatorMatrix A = assemble_laplacian(grid);
  std::vector<double> u(grid->size());
  for (int i = 0; i < grid->size(); ++i)
    u[i] = grid->center(i) * grid->center(i);
  auto au = A.apply(u);
  for (int i = grid->size() / 4; i < grid->size() / 2; ++i)
    CHECK(au[i] == Catch::Approx(6.0).epsilon(2e-3));
}

TEST_CASE("absorption term") {
  auto grid = build_grid(2.0, 64, 1.0, 0.0, 3);
  SECTION("zero maps to zero, unit maps to unit at beta = 0") {
    RadialField z(grid);
    auto az = absorption(z, 0.0, 2.0);
    CHECK(az.max() == 0.0);
    RadialField one(grid);
    for (auto& x : one.values) x = 1.0;
    auto aone = absorption(one, 0.0, 2.0);
    for (double v : aone.values) CHECK(v == 1.0);
  }
  SECTION("pointwise arithmetic with beta = 1, p = 2") {
    RadialField u(grid);
    // place the value 2 at the cell whose center is nearest 0.5
    int j = 0;
    for (int i = 0; i < grid->size(); ++i)
      if (std::abs(grid->center(i) - 0.5) < std::abs(grid->center(j) - 0.5))
        j = i;
    u.values[j] = 2.0;
    auto a = absorption(u, 1.0, 2.0);
    CHECK(a.values[j] == Catch::Approx(grid->center(j) * 4.0));
  }
  SECTION("sign preserving") {
    RadialField u(grid);
    u.values[10] = -3.0;
    auto a = absorption(u, 0.0, 1.5);
    CHECK(a.values[10] < 0.0);
    CHECK(a.values[10] == Catch::Approx(-std::pow(3.0, 1.5)));
  }
}

TEST_CASE("discrete Hardy Rayleigh minimum") {
  // Strong grading resolves the logarithmic near-optimizer; the Ritz
  // quotient approaches the continuum constant from above.
  SECTION("lambda = 0, N = 3: continuum constant 1/4 within 5% at n = 512") {
    auto g = build_grid(12.0, 512, 6.0, 0.0, 3);
    const double mu = hardy_rayleigh_min(*g);
    CHECK(mu >= 0.25 * (1.0 - 0.05));
    CHECK(mu <= 0.25 * (1.0 + 0.05));
  }
  SECTION("monotone refinement trend toward the continuum constant") {
    double prev_gap = 1e300;
    for (int n : {128, 256, 512}) {
      auto g = build_grid(12.0, n, 6.0, 0.0, 3);
      const double mu = hardy_rayleigh_min(*g);
      CHECK(mu >= 0.25);  // upper-bound property of the Ritz quotient
      const double gap = mu - 0.25;
      CHECK(gap < prev_gap);
      prev_gap = gap;
    }
  }
  SECTION("continuum constants for other lambda") {
    auto g1 = build_grid(12.0, 512, 6.0, 0.5, 3);   // ((N-2+2l)/2)^2 = 1
    CHECK(hardy_rayleigh_min(*g1) == Catch::Approx(1.0).epsilon(0.05));
    auto g2 = build_grid(12.0, 512, 6.0, -0.5, 4);  // ((4-2-1)/2)^2 = 1/4
    CHECK(hardy_rayleigh_min(*g2) == Catch::Approx(0.25).epsilon(0.05));
  }
}

TEST_CASE("K-weighted Hardy inequality on the bump test function") {
  for (int n : {512, 1024}) {
    auto g = build_grid(12.0, n, 2.0, 0.25, 3);
    RadialField theta = RadialField::of(g, [](double r) {
      const double s = std::max(0.0, 1.0 - r * r);
      return s * s;
    });
    auto rep = hardy_K_inequality_check(g, 0.25, theta, 1e-2);
    CHECK(rep.holds);
    CHECK(rep.lhs > 0.0);
    CHECK(rep.rhs > 0.0);
  }
  SECTION("zero function gives 0 >= 0") {
    auto g = build_grid(12.0, 512, 2.0, 0.0, 3);
    RadialField z(g);
    auto rep = hardy_K_inequality_check(g, 0.0, z);
    CHECK(rep.holds);
    CHECK(rep.lhs == 0.0);
    CHECK(rep.rhs == 0.0);
  }
  SECTION("scaling invariance of the ratio") {
    auto g = build_grid(12.0, 512, 2.0, 0.0, 3);
    RadialField theta = RadialField::of(g, [](double r) {
      const double s = std::max(0.0, 1.0 - r * r);
      return s * s;
    });
    auto r1 = hardy_K_inequality_check(g, 0.0, theta);
    for (auto& x : theta.values) x *= 2.0;
    auto r2 = hardy_K_inequality_check(g, 0.0, theta);
    CHECK(r2.lhs == Catch::Approx(4.0 * r1.lhs).epsilon(1e-13));
    CHECK(r2.rhs == Catch::Approx(4.0 * r1.rhs).epsilon(1e-13));
  }
}

TEST_CASE("tridiagonal solver against a dense check") {
  Rng rng(3);
  const int n = 50;
  std::vector<double> sub(n), diag(n), super(n), x(n);
  for (int i = 0; i < n; ++i) {
    sub[i] = rng.uniform(-1.0, 0.0);
    super[i] = rng.uniform(-1.0, 0.0);
    diag[i] = 4.0 + rng.uniform();
    x[i] = rng.uniform(-2.0, 2.0);
  }
  std::vector<double> b(n);
  for (int i = 0; i < n; ++i) {
    b[i] = diag[i] * x[i];
    if (i > 0) b[i] += sub[i] * x[i - 1];
    if (i + 1 < n) b[i] += super[i] * x[i + 1];
  }
  auto sol = thomas_solve(sub, diag, super, b);
  for (int i = 0; i < n; ++i)
    CHECK(sol[i] == Catch::Approx(x[i]).margin(1e-12));
}
