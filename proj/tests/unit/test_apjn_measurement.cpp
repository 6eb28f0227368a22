#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "oracles.hpp"
#include "sigprop/apjn_measurement.hpp"
#include "sigprop/errors.hpp"

using namespace sigprop;

namespace {
TransformerConfig small() {
  TransformerConfig c;
  c.d = 16;
  c.n = 4;
  c.blocks = 2;
  c.seed = 3;
  return c;
}

double mean(const std::vector<double>& x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}
}  // namespace

TEST_SUITE("apjn_measurement") {
  TEST_CASE("empty range has unit APJN") {
    const auto c = small();
    const auto src = fixed_tokens(oracle::gaussian_tokens(c.n, c.d, 1));
    for (ProbeKind k : {ProbeKind::Gaussian, ProbeKind::Rademacher}) {
      const auto e = hutchinson_apjn(c, src, 2, 2, {8, 2, k, 1});
      if (k == ProbeKind::Rademacher) {
        CHECK(e.value == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(e.std_error == doctest::Approx(0.0));
      } else {
        CHECK(e.value == doctest::Approx(1.0).epsilon(0.3));
      }
    }
    const auto w = init_weights(c);
    const auto t = forward(w, src(0), c);
    CHECK(exact_apjn(t, w, c, 1, 1) == doctest::Approx(1.0));
  }

  TEST_CASE("zero scales give unit APJN") {
    auto c = small();
    c.sigma_o = c.sigma_v = c.sigma_1 = c.sigma_2 = 0.0;
    const auto e = hutchinson_apjn(c, fixed_tokens(oracle::gaussian_tokens(c.n, c.d, 2)), 0, 4,
                                   {4, 2, ProbeKind::Rademacher, 1});
    CHECK(e.value == doctest::Approx(1.0).epsilon(1e-14));
  }

  TEST_CASE("Hutchinson agrees with the exact APJN") {
    const auto c = small();
    const auto w = init_weights(c);
    const auto t = forward(w, oracle::gaussian_tokens(c.n, c.d, 4), c);
    const double exact = exact_apjn(t, w, c, 0, 4);
    CHECK(exact == doctest::Approx(oracle::fd_apjn(w, t.state(0), c, 4, 1e-5)).epsilon(1e-6));
    for (ProbeKind k : {ProbeKind::Gaussian, ProbeKind::Rademacher}) {
      const auto s = hutchinson_samples(t, w, c, 0, 4, 200, k, 99);
      double var = 0.0;
      const double m = mean(s);
      for (double v : s) var += (v - m) * (v - m);
      const double se = std::sqrt(var / (s.size() - 1) / s.size());
      CHECK(std::abs(m - exact) < 3.0 * se);
    }
  }

  TEST_CASE("backward profile matches single-range estimates") {
    const auto c = small();
    const auto src = fixed_tokens(oracle::gaussian_tokens(c.n, c.d, 5));
    const EstimatorOptions o{6, 3, ProbeKind::Gaussian, 2};
    const auto profile = hutchinson_backward_profile(c, src, 4, o);
    REQUIRE(profile.size() == 5);
    const auto single = hutchinson_apjn(c, src, 1, 4, o);
    CHECK(profile[1].value == doctest::Approx(single.value).epsilon(1e-12));
    CHECK(profile[1].per_seed.size() == 3);
    CHECK(profile[4].value == doctest::Approx(mean(profile[4].per_seed)));
    std::ostringstream os;
    write_measurements_csv(os, profile);
    CHECK(os.str().rfind("l_lo,l_hi,estimate,std_error,n_probes,n_seeds\n0,4,", 0) == 0);
  }

  TEST_CASE("estimator is independent of the thread count") {
    const auto c = small();
    const auto src = fixed_tokens(oracle::gaussian_tokens(c.n, c.d, 6));
    const auto a = hutchinson_apjn(c, src, 0, 4, {5, 4, ProbeKind::Gaussian, 1});
    const auto b = hutchinson_apjn(c, src, 0, 4, {5, 4, ProbeKind::Gaussian, 3});
    CHECK(a.value == b.value);
    CHECK_THROWS_AS(hutchinson_apjn(c, src, 0, 4, {0, 1, ProbeKind::Gaussian, 1}), DomainError);
  }

  TEST_CASE("GMFE") {
    CHECK(gmfe({1.0, 2.0}, {1.0, 2.0}) == 1.0);
    CHECK(gmfe({2.0, 4.0}, {1.0, 2.0}) == doctest::Approx(2.0));
    CHECK(gmfe({2.0, 1.0}, {1.0, 2.0}) == doctest::Approx(2.0));
    CHECK_THROWS_AS(gmfe({1.0, 0.0}, {1.0, 1.0}), DomainError);
    CHECK_THROWS_AS(gmfe({1.0}, {1.0, 1.0}), ShapeError);
  }

  TEST_CASE("regions") {
    CHECK(region_of_block(0, 12) == -1);
    CHECK(region_of_block(4, 12) == 0);
    CHECK(region_of_block(5, 12) == 1);
    CHECK(region_of_block(8, 12) == 1);
    CHECK(region_of_block(9, 12) == 2);
    CHECK(region_of_block(11, 12) == 2);
    CHECK(region_of_block(12, 12) == -1);
    std::vector<double> th(13, 1.0), me(13, 1.0);
    me[10] = 4.0;
    const auto r = region_gmfe(th, me);
    CHECK(r[0] == 1.0);
    CHECK(r[1] == 1.0);
    CHECK(r[2] == doctest::Approx(std::cbrt(4.0)).epsilon(1e-12));
  }

  TEST_CASE("covariance of identical tokens") {
    TokenMatrix x(3, 4);
    x.rowwise() = Eigen::RowVector4d(1.0, -1.0, 2.0, 0.0);
    const auto s = token_activation_stats(x);
    CHECK(s.q_bar == doctest::Approx(1.5));
    CHECK(s.p_bar == doctest::Approx(1.5));
    CHECK(s.delta_q == doctest::Approx(0.0));
    CHECK(s.delta_p == doctest::Approx(0.0));
    const auto c = small();
    const auto w = init_weights(c);
    const auto t = forward(w, oracle::gaussian_tokens(c.n, c.d, 7), c);
    CHECK(measure_covariance(t, 0).q_bar == doctest::Approx(token_activation_stats(t.state(0)).q_bar));
    CHECK_THROWS_AS(measure_covariance(t, 3), DomainError);
  }

  TEST_CASE("gradient amplification") {
    auto c = small();
    std::vector<TokenMatrix> batch{oracle::gaussian_tokens(c.n, c.d, 8), oracle::gaussian_tokens(c.n, c.d, 9)};
    const auto r = gradient_amplification(c, batch, 11, 2);
    REQUIRE(r.to_last_block.size() == 3);
    CHECK(r.to_last_block[2] == 1.0);
    CHECK(r.to_output[2] == 1.0);
    CHECK(r.to_last_block[0] > 0.0);
    c.sigma_o = c.sigma_v = c.sigma_1 = c.sigma_2 = 0.0;
    const auto z = gradient_amplification(c, batch, 11, 1);
    CHECK(z.to_last_block[0] == doctest::Approx(1.0));
  }

  TEST_CASE("parallel_for propagates exceptions") {
    CHECK_THROWS_AS(parallel_for(8, 3, [](int i) { if (i == 5) throw DomainError("x"); }), DomainError);
  }
}
