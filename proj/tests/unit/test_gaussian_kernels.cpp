#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "sigprop/errors.hpp"
#include "sigprop/gaussian_kernels.hpp"

using namespace sigprop;
constexpr double kPi = std::numbers::pi;

TEST_SUITE("gaussian_kernels") {
  TEST_CASE("kappa values") {
    CHECK(kappa(1.0) == doctest::Approx(1.0));
    CHECK(kappa(0.0) == doctest::Approx(1.0 / kPi));
    CHECK(kappa(-1.0) == doctest::Approx(0.0));
    // Monte-Carlo oracle value, frozen.
    CHECK(kappa(0.2) == doctest::Approx(0.424700).epsilon(1e-5));
    const auto mc = oracle::mc_kappa(0.2, 1'000'000, 3);
    CHECK(std::abs(kappa(0.2) - mc.mean) < 4 * mc.std_error);
  }

  TEST_CASE("kappa is increasing and dominates the identity") {
    double prev = -1.0;
    for (double r = -1.0; r <= 1.0; r += 0.01) {
      const double k = kappa(r);
      CHECK(k >= prev);
      CHECK(k >= r - 1e-15);
      prev = k;
    }
  }

  TEST_CASE("hat_kappa values") {
    CHECK(hat_kappa(0.0) == doctest::Approx(0.25));
    CHECK(hat_kappa(1.0) == doctest::Approx(0.5));
    CHECK(hat_kappa(-1.0) == doctest::Approx(0.0));
  }

  TEST_CASE("correlation clamping and domain errors") {
    CHECK(kappa(1.0 + 5e-13) == doctest::Approx(1.0));
    CHECK_THROWS_AS(kappa(1.0 + 1e-9), DomainError);
    CHECK_THROWS_AS(hat_kappa(-1.1), DomainError);
  }

  TEST_CASE("CovPair validation") {
    CHECK(CovPair::make(1.0, 1.0 + 5e-13).p == 1.0);
    CHECK(CovPair::make(2.0, -2.0).p == -2.0);
    CHECK_THROWS_AS(CovPair::make(1.0, 1.001), DomainError);
    CHECK_THROWS_AS(CovPair::make(0.0, 0.0), DomainError);
    CHECK(CovPair::make(1.0, -0.4).p == -0.4);
  }

  TEST_CASE("LayerNorm propagation") {
    const CovPair t = propagate_phi({1.0, 0.2}, Nonlinearity::layer_norm());
    CHECK(t.q == 1.0);
    CHECK(t.p == doctest::Approx(0.2));
    const CovPair h = propagate_phi_prime({4.0, 1.0}, Nonlinearity::layer_norm());
    CHECK(h.q == doctest::Approx(0.25));
    CHECK(h.p == doctest::Approx(0.25));
  }

  TEST_CASE("erf closed forms") {
    const auto erf1 = Nonlinearity::erf(1.0);
    const CovPair t = propagate_phi({1.0, 1.0}, erf1);
    CHECK(t.q == doctest::Approx(2.0 / kPi * std::asin(2.0 / 3.0)));
    CHECK(t.q == doctest::Approx(0.46455).epsilon(1e-5));
    CHECK(t.p == doctest::Approx(t.q));
    CHECK(propagate_phi({1.0, 0.0}, erf1).p == 0.0);
    const CovPair h = propagate_phi_prime({1.0, 0.0}, erf1);
    CHECK(h.q == doctest::Approx(4.0 / (kPi * std::sqrt(5.0))));
    CHECK(h.q == doctest::Approx(0.56941).epsilon(1e-5));
    CHECK(h.p == doctest::Approx(4.0 / (3.0 * kPi)));
    const CovPair hh = propagate_phi_prime({1.0, 1.0}, erf1);
    CHECK(hh.p == doctest::Approx(hh.q).epsilon(1e-14));
  }

  TEST_CASE("erf closed forms match adaptive quadrature and Gauss-Hermite") {
    for (double alpha : {0.3, 1.0, 2.0}) {
      const auto phi = Nonlinearity::erf(alpha);
      for (double q : {0.2, 1.0, 3.0}) {
        for (double frac : {-0.5, 0.0, 0.4, 0.9}) {
          const CovPair c{q, frac * q};
          const CovPair a = propagate_phi(c, phi);
          const CovPair gh = propagate_phi_quadrature(c, phi);
          const double oq = oracle::adaptive_pair_expectation([&](double h) { return std::erf(alpha * h); }, q, q);
          const double op = oracle::adaptive_pair_expectation([&](double h) { return std::erf(alpha * h); }, q, c.p);
          CHECK(a.q == doctest::Approx(oq).epsilon(1e-9));
          CHECK(a.p == doctest::Approx(op).epsilon(1e-9).scale(a.q));
          CHECK(a.q == doctest::Approx(gh.q).epsilon(1e-10));
          CHECK(a.p == doctest::Approx(gh.p).epsilon(1e-10).scale(a.q));
          const CovPair ah = propagate_phi_prime(c, phi);
          const CovPair ghh = propagate_phi_prime_quadrature(c, phi);
          CHECK(ah.q == doctest::Approx(ghh.q).epsilon(1e-10));
          CHECK(ah.p == doctest::Approx(ghh.p).epsilon(1e-10));
        }
      }
    }
  }

  TEST_CASE("tanh quadrature matches an independent adaptive rule") {
    const auto phi = Nonlinearity::tanh(1.0);
    for (double q : {0.3, 1.0, 4.0}) {
      for (double frac : {0.0, 0.5, 0.95}) {
        const CovPair t = propagate_phi({q, frac * q}, phi);
        const double oq = oracle::adaptive_pair_expectation([](double h) { return std::tanh(h); }, q, q);
        const double op = oracle::adaptive_pair_expectation([](double h) { return std::tanh(h); }, q, frac * q);
        CHECK(t.q == doctest::Approx(oq).epsilon(1e-9));
        CHECK(t.p == doctest::Approx(op).epsilon(1e-9).scale(t.q));
        CHECK(std::abs(t.p) <= t.q);
      }
    }
  }

  TEST_CASE("tanh at large variance falls back to the composite rule") {
    const auto phi = Nonlinearity::tanh(1.0);
    const CovPair t = propagate_phi({1e4, 0.7e4}, phi);
    const double oq = oracle::adaptive_pair_expectation([](double h) { return std::tanh(h); }, 1e4, 1e4);
    CHECK(t.q == doctest::Approx(oq).epsilon(1e-8));
    // Large-q limit: p~ -> (2/pi) arcsin(c).
    CHECK(t.p == doctest::Approx(2.0 / kPi * std::asin(0.7)).epsilon(3e-2));
    const CovPair h = propagate_phi_prime({1e4, 0.7e4}, phi);
    CHECK(h.q * std::sqrt(1e4) == doctest::Approx(c_alpha(phi)).epsilon(1e-2));
  }

  TEST_CASE("monotonicity in q for saturating maps") {
    for (const auto& phi : {Nonlinearity::erf(1.0), Nonlinearity::tanh(0.7)}) {
      double prev_t = 0.0, prev_h = 1e9;
      for (double q : {0.1, 0.3, 1.0, 3.0, 10.0}) {
        const double t = propagate_phi({q, 0.5 * q}, phi).q;
        const double h = propagate_phi_prime({q, 0.5 * q}, phi).q;
        CHECK(t > prev_t);
        CHECK(t <= 1.0);
        CHECK(h < prev_h);
        prev_t = t;
        prev_h = h;
      }
    }
  }

  TEST_CASE("c_alpha") {
    CHECK(c_alpha(Nonlinearity::erf(1.0)) == doctest::Approx(2.0 / kPi));
    CHECK(c_alpha(Nonlinearity::erf(0.5)) == doctest::Approx(1.0 / kPi));
    // tanh: (1/sqrt(2 pi)) * 4 alpha / 3
    const double ref = 4.0 / (3.0 * std::sqrt(2.0 * kPi));
    for (double a : {0.1, 0.5, 1.0, 2.0}) {
      CHECK(c_alpha(Nonlinearity::tanh(a)) / a == doctest::Approx(ref).epsilon(1e-8));
      CHECK(c_alpha(Nonlinearity::erf(a)) / a == doctest::Approx(2.0 / kPi).epsilon(1e-12));
    }
    CHECK_THROWS_AS(c_alpha(Nonlinearity::layer_norm()), DomainError);
    // Large-variance consistency of the erf derivative kernel.
    const double q = 1e6;
    CHECK(propagate_phi_prime({q, 0.0}, Nonlinearity::erf(1.0)).q * std::sqrt(q) ==
          doctest::Approx(2.0 / kPi).epsilon(1e-6));
  }

  TEST_CASE("parsing and validation") {
    CHECK(parse_norm_kind("Derf") == NormKind::Erf);
    CHECK(parse_norm_kind("dyt") == NormKind::Tanh);
    CHECK_THROWS_AS(parse_norm_kind("gelu"), DomainError);
    CHECK_THROWS_AS(propagate_phi({1.0, 0.0}, Nonlinearity::erf(0.0)), DomainError);
  }
}
