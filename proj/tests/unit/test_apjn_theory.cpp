#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "sigprop/apjn_theory.hpp"
#include "sigprop/errors.hpp"
#include "sigprop/rng.hpp"
#include "sigprop/transformer.hpp"

using namespace sigprop;

namespace {

ModelHyper hyp(double s_ov, double s_21, Nonlinearity phi = Nonlinearity::layer_norm(),
               std::optional<int> n = std::nullopt) {
  return {s_ov, s_21, n, phi};
}

}  // namespace

TEST_SUITE("apjn_theory") {
  TEST_CASE("chi factors") {
    LayerState mlp{1, LayerKind::Mlp, {1.0, 0.2}, {1.0, 0.2}};
    CHECK(chi_factor(mlp, hyp(0.3, 1.0)) == doctest::Approx(1.5));
    LayerState attn{0, LayerKind::Attention, {1.0, 0.2}, {1.0, 0.2}};
    CHECK(chi_factor(attn, hyp(0.3, 1.0)) == 1.0);
    CHECK(chi_factor(mlp, hyp(0.3, 1.0, Nonlinearity::erf(1.0))) ==
          doctest::Approx(1.0 + 0.5 * 4.0 / (std::numbers::pi * std::sqrt(5.0))));
    CHECK(chi_factor(mlp, hyp(0.3, 1.0, Nonlinearity::erf(1.0))) == doctest::Approx(1.2847).epsilon(1e-4));
  }

  TEST_CASE("forward simplified on one block") {
    const auto h = hyp(0.0, 1.0);
    const CovTrajectory t = run_trajectory({1.0, 0.2}, h, 1);
    const ApjnCurve f = forward_simplified(t, h);
    CHECK(f.value(0) == 1.0);
    CHECK(f.value(1) == 1.0);
    CHECK(f.value(2) == doctest::Approx(1.5));
    const ApjnCurve flat = forward_simplified(run_trajectory({1.0, 0.2}, hyp(0.0, 0.0), 5), hyp(0.0, 0.0));
    for (double v : flat.log_values) CHECK(v == 0.0);
  }

  TEST_CASE("explicit Jacobian of a wide MLP block") {
    // Assembled as I + W2 diag(relu') W1 P with P the RMS-norm Jacobian; single token.
    TransformerConfig cfg;
    cfg.d = 512;
    cfg.n = 1;
    cfg.blocks = 1;
    cfg.sigma_o = cfg.sigma_v = cfg.sigma_q = cfg.sigma_k = 0.0;
    cfg.sigma_1 = cfg.sigma_2 = 1.0;
    const int seeds = 16;
    double acc = 0.0;
    for (int s = 0; s < seeds; ++s) {
      cfg.seed = derive_seed(5, {std::uint64_t(s)});
      const Weights w = init_weights(cfg);
      const Eigen::VectorXd x = generate_permutation_symmetric(1.0, 1.0, 1, cfg.d, cfg.seed).tokens.row(0).transpose();
      const double r = x.norm();
      const double sd = std::sqrt(double(cfg.d));
      const Eigen::MatrixXd P = (sd / r) * (Eigen::MatrixXd::Identity(cfg.d, cfg.d) - x * x.transpose() / (r * r));
      const Eigen::VectorXd u = w.blocks[0].w1 * (sd / r * x);
      const Eigen::VectorXd mask = (u.array() > 0).cast<double>();
      const Eigen::MatrixXd J = Eigen::MatrixXd::Identity(cfg.d, cfg.d) +
                                w.blocks[0].w2 * mask.asDiagonal() * w.blocks[0].w1 * P;
      acc += J.squaredNorm() / cfg.d;
    }
    const auto h = cfg.hyper();
    const CovTrajectory t = run_trajectory({1.0, 0.2}, h, 1);
    CHECK(acc / seeds == doctest::Approx(forward_simplified(t, h).value(2)).epsilon(0.05));
  }

  TEST_CASE("backward simplified telescopes") {
    const auto h = hyp(0.4, 0.9, Nonlinearity::erf(0.8));
    const CovTrajectory t = run_trajectory({1.0, 0.2}, h, 50);
    const ApjnCurve f = forward_simplified(t, h);
    const ApjnCurve b = backward_simplified(t, h);
    const int L = t.num_layers();
    CHECK(b.value(L) == 1.0);
    CHECK(b.log_value(0) == doctest::Approx(f.log_value(L)));
    for (int l = 0; l <= L; ++l) {
      CHECK(std::abs(b.log_value(l) + f.log_value(l) - f.log_value(L)) < 1e-12);
      if (l > 0) {
        CHECK(f.value(l) >= f.value(l - 1));
        if (layer_kind(l - 1) == LayerKind::Attention) CHECK(f.log_value(l) == f.log_value(l - 1));
      }
    }
  }

  TEST_CASE("extended recursion with sigma_ov = 0 reduces to simplified") {
    for (const auto& phi : {Nonlinearity::layer_norm(), Nonlinearity::erf(1.0)}) {
      const auto h = hyp(0.0, 0.7, phi, 64);
      const CovTrajectory t = run_trajectory({1.0, 0.2}, h, 20);
      const auto fx = forward_extended(t, h);
      const auto bx = backward_extended(t, h);
      const ApjnCurve f = forward_simplified(t, h);
      const ApjnCurve b = backward_simplified(t, h);
      for (int l = 0; l <= t.num_layers(); ++l) {
        CHECK(fx[l].k() == 0.0);
        CHECK(bx[l].k() == 0.0);
        CHECK(std::abs(fx[l].log_j - f.log_value(l)) < 1e-12);
        CHECK(std::abs(bx[l].log_j - b.log_value(l)) < 1e-12);
      }
    }
  }

  TEST_CASE("extended recursion approaches simplified at large n") {
    const auto h = hyp(0.3, 0.6, Nonlinearity::layer_norm(), 1'000'000);
    const auto hs = hyp(0.3, 0.6);
    const CovTrajectory t = run_trajectory({1.0, 0.2}, h, 64);
    const CovTrajectory ts = run_trajectory({1.0, 0.2}, hs, 64);
    const auto fx = forward_extended(t, h);
    const ApjnCurve f = forward_simplified(ts, hs);
    CHECK(std::abs(std::expm1(fx.back().log_j - f.log_values.back())) < 1e-3);
  }

  TEST_CASE("K/J grows with depth at large sigma_ov") {
    const auto h = hyp(1.2, 0.6, Nonlinearity::layer_norm(), 196);
    const CovTrajectory t = run_trajectory({1.0, 0.2}, h, 32);
    const auto fx = forward_extended(t, h);
    const auto bx = backward_extended(t, h);
    CHECK(fx[2].k_over_j > 0.0);
    for (int b = 2; b <= 32; ++b) CHECK(fx[2 * b].k_over_j > fx[2 * b - 2].k_over_j);
    CHECK(bx[0].k_over_j > bx[32].k_over_j);
    for (const auto& s : fx) CHECK(s.k() >= 0.0);
    CHECK(bx.back().log_j == 0.0);
    CHECK(bx.back().k() == 0.0);
  }

  TEST_CASE("coupling swap only changes the backward K coupling") {
    const auto h = hyp(1.0, 0.6, Nonlinearity::erf(1.0), 32);
    const CovTrajectory t = run_trajectory({1.0, 0.2}, h, 8);
    const auto a = backward_extended(t, h);
    const auto b = backward_extended(t, h, {true});
    CHECK(a[0].log_j != b[0].log_j);
    // LayerNorm has q^ = p^, so the swap is a no-op there.
    const auto hl = hyp(1.0, 0.6, Nonlinearity::layer_norm(), 32);
    const CovTrajectory tl = run_trajectory({1.0, 0.2}, hl, 8);
    CHECK(backward_extended(tl, hl)[0].log_j == backward_extended(tl, hl, {true})[0].log_j);
  }

  TEST_CASE("extended recursion needs finite n") {
    const auto h = hyp(0.3, 0.6);
    const CovTrajectory t = run_trajectory({1.0, 0.2}, h, 2);
    CHECK_THROWS_AS(forward_extended(t, h), DomainError);
    CHECK_THROWS_AS(backward_extended(t, h), DomainError);
  }

  TEST_CASE("log-space accumulation survives very deep runs") {
    const auto h = hyp(0.0, 1.0, Nonlinearity::erf(1.0));
    const CovTrajectory t = run_trajectory({1.0, 0.2}, h, 100000);
    const ApjnCurve f = forward_simplified(t, h);
    CHECK(std::isfinite(f.log_values.back()));
    // log J ~ sqrt(lambda_inv B) with lambda_inv = 8 / pi^2
    CHECK(f.log_values.back() == doctest::Approx(std::sqrt(8.0 / (std::numbers::pi * std::numbers::pi) * 1e5)).epsilon(0.05));
  }

  TEST_CASE("final normalization factor") {
    CHECK(final_norm_factor(2.0, Nonlinearity::layer_norm()) == doctest::Approx(0.5));
    CHECK(final_norm_factor(6.0, Nonlinearity::erf(1.0)) == doctest::Approx(4.0 / (5.0 * std::numbers::pi)));
    CHECK(final_norm_factor(1e-12, Nonlinearity::erf(1.0)) == doctest::Approx(4.0 / std::numbers::pi));
    CHECK(final_norm_factor(6.0, Nonlinearity::erf(1.0)) ==
          doctest::Approx(propagate_phi_prime_quadrature({6.0, 6.0}, Nonlinearity::erf(1.0)).q));
    CHECK_THROWS_AS(final_norm_factor(0.0, Nonlinearity::layer_norm()), DomainError);
  }

  TEST_CASE("curves CSV") {
    const auto h = hyp(0.31, 0.61);
    const CovTrajectory t = run_trajectory({1.0, 0.2}, h, 12);
    std::ostringstream os;
    write_curves_csv(os, t, h);
    const std::string s = os.str();
    CHECK(s.rfind("block,j_forward,j_backward,k_forward,k_backward,chi\n", 0) == 0);
    CHECK(std::count(s.begin(), s.end(), '\n') == 13);
  }
}
