#include "sigprop/covariance_dynamics.hpp"

#include <cmath>
#include <ostream>

#include "sigprop/csv.hpp"
#include "sigprop/errors.hpp"

namespace sigprop {

void ModelHyper::validate() const {
  if (!(sigma_ov >= 0.0) || !std::isfinite(sigma_ov)) throw DomainError("sigma_ov must be >= 0");
  if (!(sigma_21 >= 0.0) || !std::isfinite(sigma_21)) throw DomainError("sigma_21 must be >= 0");
  if (context_n && *context_n < 2) throw DomainError("context_n must be >= 2");
  phi.validate();
}

const char* to_string(LayerKind kind) { return kind == LayerKind::Attention ? "attn" : "mlp"; }

const CovPair& CovTrajectory::at_layer(int l) const {
  if (l < 0 || l > num_layers()) throw DomainError("layer index out of range: " + std::to_string(l));
  return l == num_layers() ? final : layers[l].before;
}

void CovTrajectory::write_csv(std::ostream& os) const {
  CsvWriter w(os, {"layer", "parity", "q", "p", "q_tilde", "p_tilde"});
  for (const auto& s : layers) {
    w.row(s.layer, to_string(s.kind), s.before.q, s.before.p, s.tilde.q, s.tilde.p);
  }
}

namespace {

CovPair attention_update(const CovPair& cov, const CovPair& t, const ModelHyper& h) {
  const double s2 = h.sigma_ov * h.sigma_ov;
  if (!h.context_n) return CovPair::make(cov.q + s2 * t.p, cov.p + s2 * t.p);
  const double n = *h.context_n;
  const double inc = s2 * (t.q / n + (n - 1.0) * t.p / n);
  return CovPair::make(cov.q + inc, cov.p + inc);
}

CovPair mlp_update(const CovPair& cov, const CovPair& t, const ModelHyper& h) {
  const double half = 0.5 * h.sigma_21 * h.sigma_21;
  return CovPair::make(cov.q + half * t.q, cov.p + half * t.q * kappa(t.p / t.q));
}

}  // namespace

CovPair step_attention(const CovPair& cov, const ModelHyper& hyper) {
  return attention_update(cov, propagate_phi(cov, hyper.phi), hyper);
}

CovPair step_mlp(const CovPair& cov, const ModelHyper& hyper) {
  return mlp_update(cov, propagate_phi(cov, hyper.phi), hyper);
}

CovTrajectory run_trajectory(const CovPair& initial, const ModelHyper& hyper, int blocks) {
  hyper.validate();
  if (blocks < 1) throw DomainError("blocks must be >= 1");
  if (initial.p < 0.0) {
    throw UnsupportedRegime("initial p < 0 is outside the analysed regime (p0 >= 0)");
  }
  CovTrajectory traj;
  traj.initial = CovPair::make(initial.q, initial.p);
  traj.layers.reserve(2 * static_cast<std::size_t>(blocks));
  CovPair cur = traj.initial;
  for (int l = 0; l < 2 * blocks; ++l) {
    const LayerKind kind = layer_kind(l);
    const CovPair t = propagate_phi(cur, hyper.phi);
    traj.layers.push_back({l, kind, cur, t});
    cur = kind == LayerKind::Attention ? attention_update(cur, t, hyper) : mlp_update(cur, t, hyper);
    if (!std::isfinite(cur.q) || !std::isfinite(cur.p)) {
      throw NumericalError("non-finite covariance", l);
    }
  }
  traj.final = cur;
  return traj;
}

}  // namespace sigprop
