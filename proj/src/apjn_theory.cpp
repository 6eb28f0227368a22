#include "sigprop/apjn_theory.hpp"

#include <ostream>

#include "sigprop/csv.hpp"
#include "sigprop/errors.hpp"

namespace sigprop {
namespace {

double require_n(const ModelHyper& hyper) {
  if (!hyper.context_n) {
    throw DomainError("the extended J/K recursion needs a finite context size n");
  }
  return *hyper.context_n;
}

// One linear step [J', K'] = [[a, c], [f, e]] [J, K] applied in (log J, K/J) form.
JKState apply(const JKState& s, double a, double c, double f, double e, CompensatedSum& log_j,
              int layer) {
  const double jr = a + c * s.k_over_j;
  const double kr = f + e * s.k_over_j;
  if (!(jr > 0.0) || !std::isfinite(jr) || !std::isfinite(kr)) {
    throw NumericalError("invalid J/K update", layer);
  }
  log_j.add(std::log(jr));
  return {log_j.value(), kr / jr};
}

}  // namespace

std::vector<double> ApjnCurve::block_values() const {
  std::vector<double> out;
  for (int l = 0; l <= num_layers(); l += 2) out.push_back(value(l));
  return out;
}

double chi_factor(const LayerState& layer, const ModelHyper& hyper) {
  if (layer.kind == LayerKind::Attention) return 1.0;
  const double qhat = propagate_phi_prime(layer.before, hyper.phi).q;
  return 1.0 + 0.5 * hyper.sigma_21 * hyper.sigma_21 * qhat;
}

ApjnCurve forward_simplified(const CovTrajectory& traj, const ModelHyper& hyper) {
  ApjnCurve curve{Direction::Forward, 0, {}};
  curve.log_values.reserve(traj.layers.size() + 1);
  CompensatedSum acc;
  curve.log_values.push_back(0.0);
  for (const auto& s : traj.layers) {
    acc.add(std::log(chi_factor(s, hyper)));
    curve.log_values.push_back(acc.value());
  }
  return curve;
}

ApjnCurve backward_simplified(const CovTrajectory& traj, const ModelHyper& hyper) {
  const ApjnCurve fwd = forward_simplified(traj, hyper);
  const int L = fwd.num_layers();
  ApjnCurve curve{Direction::Backward, L, std::vector<double>(L + 1)};
  for (int l = 0; l <= L; ++l) curve.log_values[l] = fwd.log_values[L] - fwd.log_values[l];
  return curve;
}

std::vector<JKState> forward_extended(const CovTrajectory& traj, const ModelHyper& hyper) {
  const double n = require_n(hyper);
  const double so2 = hyper.sigma_ov * hyper.sigma_ov;
  const double s21 = hyper.sigma_21 * hyper.sigma_21;
  std::vector<JKState> out;
  out.reserve(traj.layers.size() + 1);
  out.push_back({0.0, 0.0});
  CompensatedSum log_j;
  for (const auto& s : traj.layers) {
    const CovPair hat = propagate_phi_prime(s.before, hyper.phi);
    const JKState& cur = out.back();
    if (s.kind == LayerKind::Attention) {
      out.push_back(apply(cur, 1.0 + so2 * hat.q / n, so2 * hat.p, so2 / n * hat.q,
                          1.0 + so2 * hat.p, log_j, s.layer));
    } else {
      const double kh = hat_kappa(s.tilde.p / s.tilde.q);
      out.push_back(apply(cur, 1.0 + 0.5 * s21 * hat.q, 0.0, 0.0, 1.0 + s21 * kh * hat.p, log_j,
                          s.layer));
    }
  }
  return out;
}

std::vector<JKState> backward_extended(const CovTrajectory& traj, const ModelHyper& hyper,
                                       const ExtendedOptions& options) {
  const double n = require_n(hyper);
  const double so2 = hyper.sigma_ov * hyper.sigma_ov;
  const double s21 = hyper.sigma_21 * hyper.sigma_21;
  const int L = traj.num_layers();
  std::vector<JKState> out(L + 1);
  CompensatedSum log_j;
  for (int l = L - 1; l >= 0; --l) {
    const LayerState& s = traj.layers[l];
    const CovPair hat = propagate_phi_prime(s.before, hyper.phi);
    const JKState& next = out[l + 1];
    if (s.kind == LayerKind::Attention) {
      const double jk = options.swap_coupling ? hat.p : hat.q;
      const double kj = options.swap_coupling ? hat.q : hat.p;
      out[l] = apply(next, 1.0 + so2 * hat.q / n, so2 * jk, so2 / n * kj, 1.0 + so2 * hat.p,
                     log_j, l);
    } else {
      const double kh = hat_kappa(s.tilde.p / s.tilde.q);
      out[l] = apply(next, 1.0 + 0.5 * s21 * hat.q, 0.0, 0.0, 1.0 + s21 * kh * hat.p, log_j, l);
    }
  }
  return out;
}

double final_norm_factor(double q_last, const Nonlinearity& phi) {
  if (!(q_last > 0.0)) throw DomainError("final variance must be positive");
  if (!phi.tanh_like()) return 1.0 / q_last;
  return propagate_phi_prime({q_last, q_last}, phi).q;
}

void write_curves_csv(std::ostream& os, const CovTrajectory& traj, const ModelHyper& hyper) {
  const int B = traj.num_blocks();
  const int L = traj.num_layers();
  CsvWriter w(os, {"block", "j_forward", "j_backward", "k_forward", "k_backward", "chi"});
  const ApjnCurve fwd = forward_simplified(traj, hyper);
  std::vector<JKState> fx, bx;
  if (hyper.finite_n()) {
    fx = forward_extended(traj, hyper);
    bx = backward_extended(traj, hyper);
  }
  for (int b = 1; b <= B; ++b) {
    const int l = 2 * b;
    const double chi = chi_factor(traj.layers[l - 1], hyper);
    if (hyper.finite_n()) {
      w.row(b, fx[l].j(), bx[l].j(), fx[l].k(), bx[l].k(), chi);
    } else {
      w.row(b, fwd.value(l), std::exp(fwd.log_values[L] - fwd.log_values[l]), 0.0, 0.0, chi);
    }
  }
}

}  // namespace sigprop
