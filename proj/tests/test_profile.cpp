#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hardyheat/profile.hpp"

using namespace hardyheat;

namespace {

const ProblemParams kBase{3, 0.0, 0.0, 1.5};

std::shared_ptr<const RadialGrid> profile_grid(int n = 2048) {
  return build_grid(16.0, n, 2.0, 0.0, 3);
}

} // namespace

TEST_CASE("functional J") {
  DerivedParams d = derive_params(kBase);
  auto g = profile_grid(512);
  OperatorMatrix K = assemble_K_laplacian(g);

  SECTION("J(0) = 0") {
    RadialField z(g);
    CHECK(evaluate_J(z, kBase, d, K) == 0.0);
  }
  SECTION("tau-scan of the Gaussian trial function finds J < 0") {
    bool found = false;
    for (double tau = 0.1; tau <= 10.0; tau *= 1.3) {
      RadialField t = RadialField::of(
          g, [tau](double r) { return tau * std::exp(-0.25 * r * r); });
      if (evaluate_J(t, kBase, d, K) < 0.0) found = true;
    }
    CHECK(found);
  }
  SECTION("sign flip leaves J unchanged") {
    RadialField t = RadialField::of(
        g, [](double r) { return 2.0 * std::exp(-0.25 * r * r); });
    const double J1 = evaluate_J(t, kBase, d, K);
    for (auto& x : t.values) x = -x;
    const double J2 = evaluate_J(t, kBase, d, K);
    CHECK(J1 == Catch::Approx(J2).epsilon(1e-14));
  }
  SECTION("analytic expansion along the Gaussian direction") {
    // J(tau phi) = tau^2/2 ((N+2l)/2 - sigma) |phi|^2_{L2_K}
    //              + tau^{p+1}/(p+1) |phi|^{p+1}_{L^{p+1}_K}  (beta = 0);
    // closed forms for N = 3, l = 0:
    //   |phi|^2_{L2_K} = 4 pi int r^2 e^{-r^2/4} dr = 8 pi^{3/2},
    //   |phi|^{p+1}   = 4 pi int r^2 e^{-1.5 r^2/4} dr = 4 pi sqrt(pi)/(4 a^1.5), a = 3/8.
    const double l2K = 8.0 * std::pow(M_PI, 1.5);
    const double lpK =
        4.0 * M_PI * std::sqrt(M_PI) / (4.0 * std::pow(0.375, 1.5));
    const double tau = 1e-4;
    RadialField t = RadialField::of(
        g, [tau](double r) { return tau * std::exp(-0.25 * r * r); });
    const double expect = 0.5 * tau * tau * (1.5 - d.sigma) * l2K +
                          std::pow(tau, kBase.p + 1.0) / (kBase.p + 1.0) * lpK;
    CHECK(evaluate_J(t, kBase, d, K) == Catch::Approx(expect).epsilon(1e-3));
  }
}

TEST_CASE("variational minimizer") {
  DerivedParams d = derive_params(kBase);
  auto g = profile_grid();

  ProfileSolution sol = minimize_J(kBase, d, g);

  SECTION("nontrivial, negative energy, small EL residual") {
    CHECK(sol.J_value < 0.0);
    CHECK(sol.EL_residual_norm < 1e-6);
    CHECK(sol.value_at_origin > 0.1);
    CHECK(sol.value_at_origin <= 4.0);  // flat-supersolution ceiling
    for (double v : sol.v) CHECK(v >= 0.0);
  }
  SECTION("coercivity witness at eps = 1/2 is finite") {
    CHECK(std::isfinite(sol.fitted_C_eps));
  }
  SECTION("decay certificate") {
    DecayReport rep = check_decay(sol);
    CHECK(std::isfinite(rep.C));
    CHECK_FALSE(rep.violated);
  }
  SECTION("supercritical p is rejected") {
    ProblemParams bad{3, 0.0, 0.0, 1.7};  // p* = 5/3 < 1.7
    DerivedParams db = derive_params(bad);
    CHECK_THROWS_AS(minimize_J(bad, db, g), Error);
  }
}

TEST_CASE("shooting profile and cross-validation") {
  DerivedParams d = derive_params(kBase);
  auto g = profile_grid();

  ProfileSolution shot = shoot_profile(kBase, d, g);

  SECTION("threshold within the flat ceiling bracket") {
    CHECK(shot.a_star > 0.0);
    CHECK(shot.a_star <= 4.0);
    // frozen from two independent integrators (RK4 here, RK45 offline)
    CHECK(shot.a_star == Catch::Approx(0.7952601911).epsilon(1e-6));
  }
  SECTION("weak form of the profile equation holds on the shot profile") {
    // independent quadrature-based weak residual on the dense integrator
    // output, not the FV stencil
    REQUIRE(shot.dense_xi.size() > 1000);
    auto lookup = [&](const std::vector<double>& ys, double x) {
      const auto& xs = shot.dense_xi;
      if (x <= xs.front()) return ys.front();
      if (x >= xs.back()) return ys.back();
      const auto it = std::lower_bound(xs.begin(), xs.end(), x);
      const std::size_t j = it - xs.begin();
      const double w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
      return (1.0 - w) * ys[j - 1] + w * ys[j];
    };
    auto v = [&](double x) { return lookup(shot.dense_v, x); };
    auto dv = [&](double x) { return lookup(shot.dense_dv, x); };
    const double resid =
        weak_form_residual(v, dv, kBase, d, 0.0, 3, 6.0, 600);
    CHECK(resid < 1e-5);
  }
  SECTION("variational and shooting profiles agree to 1e-3 on [0, 6]") {
    ProfileSolution var = minimize_J(kBase, d, g);
    double worst = 0.0, scale = 0.0;
    for (int i = 0; i < g->size(); ++i) {
      if (g->center(i) > 6.0) break;
      worst = std::max(worst, std::abs(var.v[i] - shot.v[i]));
      scale = std::max(scale, std::abs(shot.v[i]));
    }
    CHECK(worst / scale <= 1e-3);
  }
  SECTION("far-above-threshold shots blow through the envelope") {
    auto res = detail::shoot_once(100.0, kBase, d, *g);
    CHECK(res.cls == detail::ShotClass::envelope_violation);
  }
}

TEST_CASE("decay certification") {
  auto g = profile_grid(512);
  SECTION("Gaussian e^{-xi^2/4} passes with C = e^{-1/8} at xi = 1") {
    ProfileSolution sol;
    sol.grid = g;
    sol.method = "synthetic";
    sol.v.resize(g->size());
    for (int i = 0; i < g->size(); ++i)
      sol.v[i] = std::exp(-0.25 * g->center(i) * g->center(i));
    DecayReport rep = check_decay(sol);
    // the sup is attained at the first center past xi = 1
    double c1 = 0.0;
    for (int i = 0; i < g->size(); ++i)
      if (g->center(i) >= 1.0) { c1 = g->center(i); break; }
    CHECK(rep.C == Catch::Approx(std::exp(-c1 * c1 / 8.0)).epsilon(1e-12));
    CHECK(rep.C == Catch::Approx(std::exp(-0.125)).epsilon(5e-3));
  }
  SECTION("slow decay e^{-xi^2/16} is rejected") {
    ProfileSolution sol;
    sol.grid = g;
    sol.method = "synthetic";
    sol.v.resize(g->size());
    for (int i = 0; i < g->size(); ++i)
      sol.v[i] = std::exp(-g->center(i) * g->center(i) / 16.0);
    CHECK_THROWS_AS(check_decay(sol), Error);
  }
}

TEST_CASE("descent invariants across parameter sets") {
  // lambda = 1/2 (kappa = -3/4) and lambda = -1/4 (kappa = 3/16) cases
  for (auto [kappa, alpha, p] : {std::tuple{-0.75, 0.0, 1.5},
                                 std::tuple{3.0 / 16.0, 0.0, 1.5}}) {
    ProblemParams pr{3, kappa, alpha, p};
    DerivedParams d = derive_params(pr);
    REQUIRE(pr.p < d.p_star);
    auto g = build_grid(16.0, 2048, 2.0, d.lambda, 3);
    ProfileSolution var = minimize_J(pr, d, g);
    ProfileSolution shot = shoot_profile(pr, d, g);
    CHECK(var.J_value < 0.0);
    CHECK(var.EL_residual_norm < 1e-6);
    double worst = 0.0, scale = 0.0;
    for (int i = 0; i < g->size(); ++i) {
      if (g->center(i) > 6.0) break;
      worst = std::max(worst, std::abs(var.v[i] - shot.v[i]));
      scale = std::max(scale, std::abs(shot.v[i]));
    }
    CHECK(worst / scale <= 2e-3);
    DecayReport rep = check_decay(var);
    CHECK(std::isfinite(rep.C));
  }
}
