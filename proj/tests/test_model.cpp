#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hardyheat/model.hpp"

using namespace hardyheat;

TEST_CASE("derived exponents on the worked parameter sets") {
  SECTION("kappa = 0 reduces to the classical exponents") {
    auto d = derive_params({3, 0.0, 0.0, 1.5});
    CHECK(d.lambda == 0.0);
    CHECK(d.beta == 0.0);
    CHECK(d.sigma == Catch::Approx(2.0).epsilon(1e-14));
    CHECK(d.p_star == Catch::Approx(5.0 / 3.0).epsilon(1e-14));
    CHECK(d.p_star_star == Catch::Approx(5.0 / 3.0).epsilon(1e-14));
  }
  SECTION("negative kappa, positive lambda") {
    auto d = derive_params({3, -0.75, 0.0, 2.0});
    CHECK(d.lambda == Catch::Approx(0.5).margin(1e-14));
    CHECK(d.beta == Catch::Approx(0.5).margin(1e-14));
    CHECK(d.sigma == Catch::Approx(1.25).margin(1e-14));
    CHECK(d.p_star == Catch::Approx(1.625).margin(1e-14));
    CHECK(d.p_star_star == Catch::Approx(1.0 + 4.0 / 7.0).margin(1e-14));
  }
  SECTION("positive kappa, negative lambda, N = 4") {
    auto d = derive_params({4, 0.75, 1.0, 2.0});
    CHECK(d.lambda == Catch::Approx(-0.5).margin(1e-14));
    CHECK(d.beta == Catch::Approx(0.5).margin(1e-14));
    CHECK(d.sigma == Catch::Approx(1.25).margin(1e-14));
    CHECK(d.p_star == Catch::Approx(1.0 + 2.5 / 3.0).margin(1e-14));
    CHECK(d.p_star_star == Catch::Approx(1.0 + 3.0 / 3.5).margin(1e-14));
  }
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(derive_params({3, 0.25, 0.0, 2.0}), Error);  // critical kappa
  CHECK_THROWS_AS(derive_params({3, 0.3, 0.0, 2.0}), Error);
  CHECK_THROWS_AS(derive_params({2, 0.0, 0.0, 2.0}), Error);
  CHECK_THROWS_AS(derive_params({3, 0.0, -2.0, 2.0}), Error);
  CHECK_THROWS_AS(derive_params({3, 0.0, 0.0, 1.0}), Error);
  CHECK_THROWS_AS(lambda_smaller_root({3, 0.0, 0.0, 1.5}), Error);
}

TEST_CASE("indicial equation and criticality consistency over a sweep") {
  for (int N : {3, 4, 5, 7}) {
    for (double kappa : {-2.0, -0.75, 0.0, 0.1, 0.2}) {
      if (kappa >= 0.25 * (N - 2) * (N - 2)) continue;
      for (double alpha : {-0.5, 0.0, 1.0}) {
        for (double p : {1.1, 1.5, 2.0, 3.0}) {
          ProblemParams pr{N, kappa, alpha, p};
          DerivedParams d;
          try {
            d = derive_params(pr);
          } catch (const Error&) {
            continue;  // beta <= -2 combinations are rejected by contract
          }
          const double resid =
              d.lambda * d.lambda + d.lambda * (N - 2) + kappa;
          CHECK(std::abs(resid) <= 1e-12);
          CHECK(d.lambda > -0.5 * (N - 2));
          CHECK((p < d.p_star) == (p < d.p_star_star));
          if (p <= d.p_star) CHECK(d.beta > -2.0);
          CHECK(d.sigma > 0.0);
        }
      }
    }
  }
}

TEST_CASE("ground-state transform round trip") {
  auto grid = build_grid(4.0, 64, 2.0, 0.25, 3);
  RadialField u = RadialField::of(
      grid, [](double r) { return std::exp(-r) * (1.0 + r); }, Frame::original);

  SECTION("lambda = 0 is the identity") {
    RadialField w = to_weighted(u, 0.0);
    for (int i = 0; i < u.size(); ++i) CHECK(w.values[i] == u.values[i]);
  }
  SECTION("ground state maps to the constant 1") {
    RadialField h = RadialField::of(
        grid, [](double r) { return std::pow(r, 0.25); }, Frame::original);
    RadialField w = to_weighted(h, 0.25);
    for (int i = 0; i < w.size(); ++i)
      CHECK(w.values[i] == Catch::Approx(1.0).epsilon(1e-14));
  }
  SECTION("round trip is the identity to machine precision") {
    RadialField back = from_weighted(to_weighted(u, 0.25), 0.25);
    double worst = 0.0;
    for (int i = 0; i < u.size(); ++i)
      worst = std::max(worst,
                       std::abs(back.values[i] - u.values[i]) /
                           std::abs(u.values[i]));
    CHECK(worst <= 1e-14);
  }
  SECTION("constant weighted field pulls back to r^lambda") {
    RadialField one(grid);
    for (auto& x : one.values) x = 1.0;
    RadialField back = from_weighted(one, 0.25);
    for (int i = 0; i < back.size(); ++i)
      CHECK(back.values[i] ==
            Catch::Approx(std::pow(grid->center(i), 0.25)).epsilon(1e-14));
  }
}

TEST_CASE("regime classification") {
  SECTION("subcritical and supercritical at kappa = 0") {
    ProblemParams a{3, 0.0, 0.0, 1.6};
    auto ra = classify_regime(a, derive_params(a));
    CHECK(ra.criticality == Criticality::subcritical);
    CHECK(ra.subregime == MassSubregime::classical);

    ProblemParams b{3, 0.0, 0.0, 2.0};
    auto rb = classify_regime(b, derive_params(b));
    CHECK(rb.criticality == Criticality::supercritical);
    CHECK_FALSE(rb.singular_solutions_exist);
  }
  SECTION("Lebesgue-mass vanishing window for kappa > 0") {
    ProblemParams pr{3, 3.0 / 16.0, 0.0, 1.7};
    auto d = derive_params(pr);
    CHECK(d.lambda == Catch::Approx(-0.25).margin(1e-14));
    auto rep = classify_regime(pr, d);
    CHECK(rep.criticality == Criticality::subcritical);
    CHECK(rep.subregime == MassSubregime::vanishes);
    CHECK(rep.p_star_star == Catch::Approx(1.0 + 2.0 / 2.75).margin(1e-12));
  }
  SECTION("mass diverges below the threshold, finite at it") {
    ProblemParams lo{3, 3.0 / 16.0, 0.0, 1.5};
    CHECK(classify_regime(lo, derive_params(lo)).subregime ==
          MassSubregime::diverges);
    ProblemParams at{3, 3.0 / 16.0, 0.0, 1.0 + 2.0 / 3.0};
    CHECK(classify_regime(at, derive_params(at)).subregime ==
          MassSubregime::finite_delta);
  }
  SECTION("negative kappa always diverges") {
    ProblemParams pr{3, -0.75, 0.0, 1.5};
    CHECK(classify_regime(pr, derive_params(pr)).subregime ==
          MassSubregime::diverges);
  }
  SECTION("critical tie within 1e-12") {
    ProblemParams pr{3, 0.0, 0.0, 5.0 / 3.0};
    auto rep = classify_regime(pr, derive_params(pr));
    CHECK(rep.criticality == Criticality::critical);
  }
}
