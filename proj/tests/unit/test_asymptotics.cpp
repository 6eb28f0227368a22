#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "sigprop/asymptotics.hpp"
#include "sigprop/errors.hpp"

using namespace sigprop;
constexpr double kPi = std::numbers::pi;

namespace {
ModelHyper hyp(double s_ov, double s_21, Nonlinearity phi) { return {s_ov, s_21, std::nullopt, phi}; }
}  // namespace

TEST_SUITE("asymptotics") {
  TEST_CASE("g vanishes at aligned tokens") {
    CHECK(g_of_c(1.0, hyp(0.3, 0.6, Nonlinearity::layer_norm())) == doctest::Approx(0.0));
    CHECK(g_of_c(1.0, hyp(0.3, 0.6, Nonlinearity::erf(1.0))) == doctest::Approx(0.0));
  }

  TEST_CASE("leading behaviour of g below one") {
    const double v = g_of_c(1.0 - 1e-6, hyp(0.0, 1.0, Nonlinearity::erf(1.0)));
    CHECK(v < 0.0);
    CHECK(v == doctest::Approx(-std::sqrt(2.0) / kPi * 1e-3).epsilon(0.1));
  }

  TEST_CASE("analytic derivative matches central differences") {
    for (const auto& phi : {Nonlinearity::layer_norm(), Nonlinearity::erf(1.0)}) {
      const auto h = hyp(0.4, 0.9, phi);
      for (double c : {0.1, 0.4, 0.8, 0.95}) {
        const double fd = (g_of_c(c + 1e-6, h) - g_of_c(c - 1e-6, h)) / 2e-6;
        CHECK(g_prime(c, h) == doctest::Approx(fd).epsilon(1e-6));
      }
    }
  }

  TEST_CASE("LayerNorm fixed point and rate") {
    for (double s21 : {0.3, 1.0}) {
      for (double sov : {0.15, 1.2}) {
        const FixedPointReport r = solve_c_star(hyp(sov, s21, Nonlinearity::layer_norm()));
        CHECK(r.c_star == 1.0);
        CHECK(r.mu == doctest::Approx(sov * sov / (sov * sov + 0.5 * s21 * s21)).epsilon(1e-14));
        CHECK(r.stable);
      }
    }
  }

  TEST_CASE("erf fixed point is a root with a stable slope") {
    const auto h = hyp(0.31, 0.6, Nonlinearity::erf(1.0));
    const FixedPointReport r = solve_c_star(h);
    CHECK(std::abs(g_of_c(r.c_star, h)) < 1e-12);
    CHECK(r.c_star > 0.0);
    CHECK(r.c_star < 1.0);
    CHECK(r.stable);
    CHECK(r.g_prime == doctest::Approx(g_prime(r.c_star, h)).epsilon(1e-6));
    CHECK(r.mu == doctest::Approx(-r.g_prime / block_increments(r.c_star, h).dq));
    CHECK(r.p_tilde_star == doctest::Approx(2.0 / kPi * std::asin(r.c_star)));
  }

  TEST_CASE("sigma_ov = 0 fixed point matches damped iteration") {
    const FixedPointReport r = solve_c_star(hyp(0.0, 0.8, Nonlinearity::erf(1.0)));
    const double c = oracle::damped_fixed_point(0.3, 0.5, 20000);
    CHECK(r.c_star == doctest::Approx(c).epsilon(1e-9));
    CHECK(r.c_star == doctest::Approx(kappa(2.0 / kPi * std::asin(r.c_star))).epsilon(1e-11));
  }

  TEST_CASE("no interior root without an MLP branch") {
    CHECK_THROWS_AS(solve_c_star(hyp(0.5, 0.0, Nonlinearity::erf(1.0))), NoInteriorRoot);
  }

  TEST_CASE("asymptotic laws") {
    CHECK(asymptotic_law(hyp(0.0, 0.7, Nonlinearity::layer_norm())).zeta == 1.0);
    const double s = 0.6;
    const auto half = asymptotic_law(hyp(s, std::sqrt(2.0) * s, Nonlinearity::layer_norm()));
    CHECK(half.zeta == doctest::Approx(0.5));
    CHECK(half.regime == Regime::CriticalPowerLaw);
    CHECK(half.q_slope == doctest::Approx(0.5 * 2 * s * s + s * s));
    const auto erf = asymptotic_law(hyp(0.0, 1.0, Nonlinearity::erf(1.0)));
    CHECK(erf.regime == Regime::SubcriticalStretched);
    CHECK(erf.lambda_inv == doctest::Approx(8.0 / (kPi * kPi)));
    CHECK(erf.lambda_inv == doctest::Approx(0.81057).epsilon(1e-5));
  }

  TEST_CASE("Q grows at the predicted slope") {
    const auto h = hyp(0.31, 0.6, Nonlinearity::erf(1.0));
    const CovTrajectory t = run_trajectory({0.5, 0.25}, h, 10000);
    const double slope = (t.block(10000).q - t.block(9000).q) / 1000.0;
    CHECK(slope == doctest::Approx(asymptotic_law(h).q_slope).epsilon(0.05));
  }

  TEST_CASE("asymptotic curves") {
    AsymptoticLaw pl{Regime::CriticalPowerLaw, 0.5, 0.0, 0.0, 0.0};
    CHECK(asymptotic_curve(pl, 25, 100, Direction::Backward) == doctest::Approx(2.0));
    CHECK(asymptotic_curve(pl, 100, 100, Direction::Backward) == 1.0);
    AsymptoticLaw st{Regime::SubcriticalStretched, 0.0, 1.0, 0.0, 0.0};
    CHECK(asymptotic_curve(st, 25, 100, Direction::Backward) ==
          doctest::Approx(std::pow(4.0, -1.0 / 8.0) * std::exp(5.0)));
    CHECK(asymptotic_curve(st, 100, 100, Direction::Backward) == 1.0);
    const Anchor a{50.0, 3.0};
    CHECK(asymptotic_curve(st, 50, 100, Direction::Forward, a) == doctest::Approx(3.0));
    CHECK(asymptotic_curve(pl, 80, 100, Direction::Forward, a) == doctest::Approx(3.0 * std::sqrt(80.0 / 50.0)));
    CHECK_THROWS_AS(asymptotic_shape(pl, 0.5, 100, Direction::Forward), DomainError);
  }

  TEST_CASE("phase map CSV") {
    std::vector<PhaseRow> rows{phase_point(hyp(1.0, std::sqrt(2.0), Nonlinearity::layer_norm())),
                               phase_point(hyp(0.3, 0.6, Nonlinearity::erf(1.0))),
                               phase_point(hyp(0.3, 0.0, Nonlinearity::erf(1.0)))};
    CHECK(rows[0].zeta == doctest::Approx(0.5));
    CHECK(rows[1].regime == "subcritical_stretched");
    CHECK(rows[2].regime == "no_interior_root");
    std::ostringstream os;
    write_phase_csv(os, rows);
    CHECK(os.str().rfind("sigma_21,sigma_ov,alpha,regime,zeta,lambda_inv,c_star,mu\n", 0) == 0);
  }
}
