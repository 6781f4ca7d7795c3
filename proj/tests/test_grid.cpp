#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hardyheat/grid.hpp"
#include "hardyheat/model.hpp"

using namespace hardyheat;

TEST_CASE("grid construction and closed-form cell masses") {
  SECTION("uniform faces and exact r^2 masses") {
    auto g = build_grid(1.0, 16, 1.0, 0.0, 3);
    CHECK(g->face(0) == 0.0);
    CHECK(g->face(16) == 1.0);
    CHECK(g->face(4) == Catch::Approx(0.25).margin(1e-15));
    // first four cells of the n=4 layout appear at every fourth face here;
    // check the documented n=4 values directly on a coarse grid
  }
  SECTION("documented n=4 example (relaxed minimum size bypassed via n=16 blocks)") {
    // The spec layout at n=4: faces {0, .25, .5, .75, 1}, masses k/192.
    // Our constructor enforces n >= 16, so verify the same integrals directly.
    CHECK(RadialGrid::power_mass(0.0, 0.25, 2.0) == Catch::Approx(1.0 / 192.0));
    CHECK(RadialGrid::power_mass(0.25, 0.5, 2.0) == Catch::Approx(7.0 / 192.0));
    CHECK(RadialGrid::power_mass(0.5, 0.75, 2.0) == Catch::Approx(19.0 / 192.0));
    CHECK(RadialGrid::power_mass(0.75, 1.0, 2.0) == Catch::Approx(37.0 / 192.0));
  }
  SECTION("quadratic grading") {
    auto g = build_grid(1.0, 16, 2.0, 0.0, 3);
    CHECK(g->face(4) == Catch::Approx(1.0 / 16.0).margin(1e-15));
    CHECK(g->face(8) == Catch::Approx(4.0 / 16.0).margin(1e-15));
    CHECK(g->face(12) == Catch::Approx(9.0 / 16.0).margin(1e-15));
  }
  SECTION("total weighted mass matches the closed form") {
    for (double lam : {0.0, 0.5, -0.25}) {
      auto g = build_grid(2.0, 128, 2.0, lam, 3);
      double total = 0.0;
      for (int i = 0; i < g->size(); ++i) total += g->cell_mass(i);
      const double q = 3.0 + 2.0 * lam;
      CHECK(total == Catch::Approx(std::pow(2.0, q) / q).epsilon(1e-13));
    }
  }
  SECTION("grid invariants") {
    auto g = build_grid(12.0, 256, 2.0, 0.5, 3);
    for (int i = 0; i < g->size(); ++i) {
      CHECK(g->face(i) < g->center(i));
      CHECK(g->center(i) < g->face(i + 1));
      CHECK(g->cell_mass(i) > 0.0);
      CHECK(g->K_cell_mass(i) > 0.0);
    }
  }
  SECTION("bad arguments") {
    CHECK_THROWS_AS(build_grid(-1.0, 32, 1.0, 0.0, 3), Error);
    CHECK_THROWS_AS(build_grid(1.0, 8, 1.0, 0.0, 3), Error);
    CHECK_THROWS_AS(build_grid(1.0, 32, 1.0, -0.6, 3), Error);  // lambda too low
  }
}

TEST_CASE("weighted ball integrals") {
  SECTION("unit field gives the weighted ball volume") {
    auto g = build_grid(1.0, 64, 1.0, 0.0, 3);
    RadialField one(g);
    for (auto& x : one.values) x = 1.0;
    CHECK(weighted_integral(one, 1.0) ==
          Catch::Approx(4.0 * M_PI / 3.0).epsilon(1e-13));

    auto gl = build_grid(1.0, 64, 1.0, 0.5, 3);
    RadialField onel(gl);
    for (auto& x : onel.values) x = 1.0;
    CHECK(weighted_integral(onel, 1.0) == Catch::Approx(M_PI).epsilon(1e-13));
  }
  SECTION("partial cells are handled by the exact fractional integral") {
    auto g = build_grid(1.0, 64, 1.0, 0.0, 3);
    RadialField one(g);
    for (auto& x : one.values) x = 1.0;
    const double rho = 0.617;  // not a face
    CHECK(weighted_integral(one, rho) ==
          Catch::Approx(4.0 * M_PI / 3.0 * rho * rho * rho).epsilon(1e-13));
  }
  SECTION("midpoint quadrature of f(r) = r converges at order 2") {
    double prev_err = 0.0;
    for (int n : {64, 128, 256}) {
      auto g = build_grid(1.0, n, 1.0, 0.0, 3);
      RadialField f = RadialField::of(g, [](double r) { return r; });
      const double err = std::abs(weighted_integral(f, 1.0) - M_PI);
      if (prev_err > 0.0) {
        const double ratio = prev_err / err;
        CHECK(ratio > 3.0);
        CHECK(ratio < 5.0);
      }
      prev_err = err;
    }
  }
  SECTION("out of range radius") {
    auto g = build_grid(1.0, 64, 1.0, 0.0, 3);
    RadialField one(g);
    CHECK_THROWS_AS(weighted_integral(one, 2.0), Error);
  }
}

TEST_CASE("lebesgue integrals in original variables") {
  auto g = build_grid(1.0, 512, 1.0, -0.25, 3);
  SECTION("unit field") {
    RadialField one(g, Frame::original);
    for (auto& x : one.values) x = 1.0;
    CHECK(lebesgue_integral(one, 1.0) ==
          Catch::Approx(4.0 * M_PI / 3.0).epsilon(1e-13));
  }
  SECTION("power field r^lambda with lambda = -1/4") {
    RadialField f = RadialField::of(
        g, [](double r) { return std::pow(r, -0.25); }, Frame::original);
    // omega_3 / (N + lambda) = 4 pi / 2.75; midpoint quadrature error O(n^-2)
    CHECK(lebesgue_integral(f, 1.0) ==
          Catch::Approx(4.0 * M_PI / 2.75).epsilon(1e-4));
  }
  SECTION("consistency with the weighted integral through the transform") {
    RadialField one_w(g);
    for (auto& x : one_w.values) x = 1.0;
    RadialField orig = from_weighted(one_w, -0.25);
    // lebesgue_integral(from_weighted(1)) = omega int r^{lambda+N-1} dr;
    // the integrand is sampled at midpoints, so this holds to quadrature order
    CHECK(lebesgue_integral(orig, 1.0) ==
          Catch::Approx(4.0 * M_PI / 2.75).epsilon(1e-5));
  }
}

TEST_CASE("K-weighted integrals") {
  SECTION("Gaussian against the high-resolution oracle") {
    // Oracle: composite Simpson for omega_3 * int_0^R r^2 e^{-r^2/2} e^{r^2/4} dr.
    const double R = 12.0;
    const int m = 1'000'000;
    const double h = R / m;
    auto f = [](double r) { return r * r * std::exp(-0.25 * r * r); };
    double simpson = f(0.0) + f(R);
    for (int k = 1; k < m; ++k) simpson += (k % 2 ? 4.0 : 2.0) * f(k * h);
    simpson *= h / 3.0;
    const double oracle = 4.0 * M_PI * simpson;
    // Closed form for this case: 8 pi^{3/2}.
    CHECK(oracle == Catch::Approx(8.0 * std::pow(M_PI, 1.5)).epsilon(1e-10));

    // The field is sampled at cell midpoints, so accuracy is second order;
    // check the value at n = 512 and the improvement under refinement.
    auto g = build_grid(R, 512, 2.0, 0.0, 3);
    RadialField gau =
        RadialField::of(g, [](double r) { return std::exp(-0.5 * r * r); });
    const double e512 = std::abs(K_integral(gau) - oracle);
    CHECK(e512 <= 5e-4 * oracle);
    auto g2 = build_grid(R, 1024, 2.0, 0.0, 3);
    RadialField gau2 =
        RadialField::of(g2, [](double r) { return std::exp(-0.5 * r * r); });
    const double e1024 = std::abs(K_integral(gau2) - oracle);
    CHECK(e1024 < e512);
    CHECK(e512 / e1024 > 3.0);
  }
  SECTION("zero field and monotonicity in the integrand") {
    auto g = build_grid(12.0, 128, 2.0, 0.25, 3);
    RadialField z(g);
    CHECK(K_integral(z) == 0.0);
    RadialField lo = RadialField::of(g, [](double r) { return std::exp(-r * r); });
    RadialField hi = lo;
    for (auto& x : hi.values) x *= 1.5;
    CHECK(K_integral(hi) >= K_integral(lo));
  }
}
