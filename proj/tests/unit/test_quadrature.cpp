#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sigprop/quadrature.hpp"

using namespace sigprop;

TEST_SUITE("quadrature") {
  TEST_CASE("weights sum to sqrt(pi)") {
    for (int n : {1, 2, 5, 16, 64, 128}) {
      const auto& r = gauss_hermite(n);
      double s = 0.0;
      for (double w : r.weights) s += w;
      CHECK(r.order() == n);
      CHECK(s == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-13));
    }
  }

  TEST_CASE("exact on monomials up to degree 2n-1") {
    // integral of x^{2k} e^{-x^2} = Gamma(k + 1/2)
    for (int n : {4, 10, 32}) {
      const auto& r = gauss_hermite(n);
      for (int deg = 0; deg <= 2 * n - 1; ++deg) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += r.weights[i] * std::pow(r.nodes[i], deg);
        const double exact = deg % 2 ? 0.0 : std::tgamma(deg / 2.0 + 0.5);
        CHECK(s == doctest::Approx(exact).epsilon(1e-11).scale(std::tgamma(deg / 2.0 + 0.5)));
      }
    }
  }

  TEST_CASE("cached rules are shared") {
    CHECK(&gauss_hermite(64) == &gauss_hermite(64));
    CHECK_THROWS(gauss_hermite(0));
  }

  TEST_CASE("Gaussian moments") {
    CHECK(gh_expectation([](double h) { return h * h; }, 2.5, 16) == doctest::Approx(2.5));
    CHECK(gh_expectation([](double h) { return h * h * h * h; }, 2.0, 16) == doctest::Approx(12.0));
    CHECK(gh_expectation([](double a, double b) { return a * b; }, 2.0, 0.7, 8) ==
          doctest::Approx(0.7));
    CHECK(gh_expectation([](double a, double b) { return a * a * b * b; }, 1.0, 0.5, 8) ==
          doctest::Approx(1.0 + 2 * 0.25));
  }

  TEST_CASE("composite rule handles a near step function") {
    // E[tanh(100 h)^2] for h ~ N(0, 1) is close to 1 but needs resolution near 0.
    auto f = [](double h) { const double t = std::tanh(100.0 * h); return t * t; };
    const double a = composite_expectation(f, 1.0, 0.01, 20);
    const double b = composite_expectation(f, 1.0, 0.01, 30);
    CHECK(std::abs(a - b) < 1e-12);
    CHECK(a < 1.0);
    CHECK(a > 0.98);
    const double c = composite_expectation([](double x, double y) { return x * y; }, 2.0, 0.5, 1.0, 20);
    CHECK(c == doctest::Approx(0.5).epsilon(1e-12));
  }

  TEST_CASE("breakpoints cover the interval with bounded panels") {
    const auto bp = clustered_breakpoints(0.3, 1e-4, 9.0, 0.5);
    CHECK(bp.front() == -9.0);
    CHECK(bp.back() == 9.0);
    for (std::size_t i = 1; i < bp.size(); ++i) {
      CHECK(bp[i] > bp[i - 1]);
      CHECK(bp[i] - bp[i - 1] <= 0.5 + 1e-12);
    }
  }
}
