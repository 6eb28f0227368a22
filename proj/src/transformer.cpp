#include "sigprop/transformer.hpp"

#include <algorithm>
#include <boost/random/normal_distribution.hpp>
#include <istream>
#include <ostream>

#include "sigprop/csv.hpp"
#include "sigprop/errors.hpp"
#include "sigprop/rng.hpp"

namespace sigprop {
namespace {

enum MatrixTag : std::uint64_t { kWq = 1, kWk, kWv, kWo, kW1, kW2 };

Eigen::MatrixXd gaussian_matrix(int rows, int cols, double stddev, std::uint64_t key) {
  Eigen::MatrixXd m(rows, cols);
  if (stddev == 0.0) {
    m.setZero();
    return m;
  }
  SplitMix64 gen(key);
  boost::random::normal_distribution<double> normal(0.0, stddev);
  // Column-major fill order is part of the reproducibility contract.
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(gen);
  return m;
}

void check_finite(const TokenMatrix& h, int layer) {
  if (!h.allFinite()) throw NumericalError("non-finite activation", layer);
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& s) {
  Eigen::MatrixXd a = (s.colwise() - s.rowwise().maxCoeff()).array().exp().matrix();
  a.array().colwise() /= a.rowwise().sum().array();
  return a;
}

void attention_forward(LayerCache& c, const BlockWeights& w, const TransformerConfig& cfg,
                       TokenMatrix& branch) {
  const int dh = cfg.head_dim();
  const int n = static_cast<int>(c.normed.rows());
  c.v = c.normed * w.wv.transpose();
  Eigen::MatrixXd z(n, cfg.d);
  if (cfg.attention == AttentionMode::Uniform) {
    const Eigen::RowVectorXd mean = c.v.colwise().mean();
    z = mean.replicate(n, 1);
  } else {
    c.q = c.normed * w.wq.transpose();
    c.k = c.normed * w.wk.transpose();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    c.probs.resize(cfg.heads);
    for (int h = 0; h < cfg.heads; ++h) {
      const auto qh = c.q.middleCols(h * dh, dh);
      const auto kh = c.k.middleCols(h * dh, dh);
      c.probs[h] = softmax_rows(scale * (qh * kh.transpose()));
      z.middleCols(h * dh, dh) = c.probs[h] * c.v.middleCols(h * dh, dh);
    }
  }
  branch = z * w.wo.transpose();
}

void mlp_forward(LayerCache& c, const BlockWeights& w, TokenMatrix& branch) {
  c.pre = c.normed * w.w1.transpose();
  branch = c.pre.cwiseMax(0.0) * w.w2.transpose();
}

// Cotangent of the branch output -> cotangent of the branch input (before normalization).
TokenMatrix attention_vjp(const LayerCache& c, const BlockWeights& w, const TransformerConfig& cfg,
                          const TokenMatrix& g) {
  const int dh = cfg.head_dim();
  const int n = static_cast<int>(g.rows());
  const Eigen::MatrixXd dz = g * w.wo;
  Eigen::MatrixXd dnormed;
  if (cfg.attention == AttentionMode::Uniform) {
    const Eigen::RowVectorXd mean = dz.colwise().mean();
    dnormed = mean.replicate(n, 1) * w.wv;
  } else {
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Eigen::MatrixXd dq(n, cfg.d), dk(n, cfg.d), dv(n, cfg.d);
    for (int h = 0; h < cfg.heads; ++h) {
      const auto& a = c.probs[h];
      const auto dzh = dz.middleCols(h * dh, dh);
      const Eigen::MatrixXd da = dzh * c.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh) = a.transpose() * dzh;
      const Eigen::VectorXd rowdot = (da.array() * a.array()).rowwise().sum();
      const Eigen::MatrixXd ds = scale * (a.array() * (da.colwise() - rowdot).array()).matrix();
      dq.middleCols(h * dh, dh) = ds * c.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh) = ds.transpose() * c.q.middleCols(h * dh, dh);
    }
    dnormed = dq * w.wq + dk * w.wk + dv * w.wv;
  }
  return normalize_vjp(c.input, dnormed, cfg);
}

TokenMatrix mlp_vjp(const LayerCache& c, const BlockWeights& w, const TransformerConfig& cfg,
                    const TokenMatrix& g) {
  const Eigen::MatrixXd du = ((g * w.w2).array() * (c.pre.array() > 0.0).cast<double>()).matrix();
  return normalize_vjp(c.input, du * w.w1, cfg);
}

}  // namespace

const char* to_string(AttentionMode mode) {
  return mode == AttentionMode::Softmax ? "softmax" : "uniform";
}

AttentionMode parse_attention_mode(const std::string& name) {
  if (name == "softmax") return AttentionMode::Softmax;
  if (name == "uniform") return AttentionMode::Uniform;
  throw DomainError("unknown attention mode '" + name + "'");
}

void TransformerConfig::validate() const {
  if (d < 1 || n < 1 || blocks < 1 || heads < 1) {
    throw DomainError("d, n, blocks and heads must be positive");
  }
  if (d % heads != 0) throw DomainError("heads must divide d");
  for (double s : {sigma_o, sigma_v, sigma_q, sigma_k, sigma_1, sigma_2}) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw DomainError("weight scales must be >= 0");
  }
  norm.validate();
}

ModelHyper TransformerConfig::hyper(std::optional<int> context_n) const {
  return {sigma_o * sigma_v, sigma_2 * sigma_1, context_n, norm};
}

Weights init_weights(const TransformerConfig& cfg) {
  cfg.validate();
  const int d = cfg.d;
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  Weights w;
  w.blocks.resize(cfg.blocks);
  for (int b = 0; b < cfg.blocks; ++b) {
    auto key = [&](std::uint64_t tag) {
      return derive_seed(cfg.seed, {stream::kWeights, static_cast<std::uint64_t>(b), tag});
    };
    auto& bw = w.blocks[b];
    bw.wq = gaussian_matrix(d, d, cfg.sigma_q * sd, key(kWq));
    bw.wk = gaussian_matrix(d, d, cfg.sigma_k * sd, key(kWk));
    bw.wv = gaussian_matrix(d, d, cfg.sigma_v * sd, key(kWv));
    bw.wo = gaussian_matrix(d, d, cfg.sigma_o * sd, key(kWo));
    bw.w1 = gaussian_matrix(4 * d, d, cfg.sigma_1 * sd, key(kW1));
    bw.w2 = gaussian_matrix(d, 4 * d, cfg.sigma_2 * sd / 2.0, key(kW2));
  }
  return w;
}

TokenMatrix normalize(const TokenMatrix& x, const TransformerConfig& cfg) {
  if (cfg.norm.tanh_like()) {
    return x.unaryExpr([&](double v) { return phi_value(cfg.norm, v); });
  }
  const double sqrt_d = std::sqrt(static_cast<double>(x.cols()));
  if (cfg.mean_subtracting_ln) {
    const TokenMatrix centered = x.colwise() - x.rowwise().mean();
    const Eigen::VectorXd norms = centered.rowwise().norm();
    return (centered.array().colwise() * (sqrt_d / norms.array())).matrix();
  }
  const Eigen::VectorXd norms = x.rowwise().norm();
  return (x.array().colwise() * (sqrt_d / norms.array())).matrix();
}

TokenMatrix normalize_vjp(const TokenMatrix& x, const TokenMatrix& dy, const TransformerConfig& cfg) {
  if (cfg.norm.tanh_like()) {
    return (x.unaryExpr([&](double v) { return phi_derivative(cfg.norm, v); }).array() * dy.array())
        .matrix();
  }
  const double sqrt_d = std::sqrt(static_cast<double>(x.cols()));
  // y = sqrt(d) u / |u| with u = x (RMS) or x - mean(x).
  const TokenMatrix u = cfg.mean_subtracting_ln ? TokenMatrix(x.colwise() - x.rowwise().mean()) : x;
  const Eigen::ArrayXd inv = u.rowwise().norm().array().inverse();
  const Eigen::ArrayXd proj = (u.array() * dy.array()).rowwise().sum() * inv.square();
  TokenMatrix du = ((dy.array() - u.array().colwise() * proj).colwise() * (sqrt_d * inv)).matrix();
  if (cfg.mean_subtracting_ln) du = du.colwise() - du.rowwise().mean();
  return du;
}

const TokenMatrix& ActivationTrace::state(int l) const {
  const int L = num_layers();
  if (l >= 0 && l < L) return layers[l].input;
  if (l == L) return output;
  if (l == L + 1 && final_output.size() > 0) return final_output;
  throw DomainError("state index out of range: " + std::to_string(l));
}

ActivationTrace forward(const Weights& weights, const TokenMatrix& tokens,
                        const TransformerConfig& cfg) {
  cfg.validate();
  if (tokens.rows() != cfg.n || tokens.cols() != cfg.d) {
    throw ShapeError("token matrix must be n x d = " + std::to_string(cfg.n) + " x " +
                     std::to_string(cfg.d));
  }
  if (static_cast<int>(weights.blocks.size()) != cfg.blocks) {
    throw ShapeError("weights do not match the number of blocks");
  }
  ActivationTrace trace;
  trace.layers.resize(cfg.num_layers());
  TokenMatrix h = tokens;
  TokenMatrix branch;
  for (int l = 0; l < cfg.num_layers(); ++l) {
    LayerCache& c = trace.layers[l];
    c.input = h;
    c.normed = normalize(h, cfg);
    check_finite(c.normed, l);
    const BlockWeights& w = weights.blocks[l / 2];
    if (layer_kind(l) == LayerKind::Attention) {
      attention_forward(c, w, cfg, branch);
    } else {
      mlp_forward(c, w, branch);
    }
    h += branch;
    check_finite(h, l);
  }
  trace.output = h;
  if (cfg.final_norm) {
    trace.final_output = normalize(h, cfg);
    check_finite(trace.final_output, cfg.num_layers());
  }
  return trace;
}

void backpropagate(const ActivationTrace& trace, const Weights& weights, const TransformerConfig& cfg,
                   const TokenMatrix& cotangent, int l_hi,
                   const std::function<void(int, const TokenMatrix&)>& visit) {
  const int L = trace.num_layers();
  if (l_hi < 0 || l_hi > L + 1 || (l_hi == L + 1 && trace.final_output.size() == 0)) {
    throw DomainError("invalid upper layer " + std::to_string(l_hi));
  }
  if (cotangent.rows() != trace.output.rows() || cotangent.cols() != trace.output.cols()) {
    throw ShapeError("cotangent shape does not match activations");
  }
  TokenMatrix g = cotangent;
  int l = l_hi;
  if (visit) visit(l, g);
  if (l == L + 1) {
    g = normalize_vjp(trace.output, g, cfg);
    l = L;
    if (visit) visit(l, g);
  }
  for (int k = l - 1; k >= 0; --k) {
    const LayerCache& c = trace.layers[k];
    const BlockWeights& w = weights.blocks[k / 2];
    g += layer_kind(k) == LayerKind::Attention ? attention_vjp(c, w, cfg, g) : mlp_vjp(c, w, cfg, g);
    if (visit) visit(k, g);
  }
}

TokenMatrix vjp(const ActivationTrace& trace, const Weights& weights, const TransformerConfig& cfg,
                const TokenMatrix& cotangent, int l_hi, int l_lo) {
  const int L = trace.num_layers();
  if (l_lo < 0 || l_lo > l_hi || l_hi > L + 1) {
    throw DomainError("need 0 <= l_lo <= l_hi <= L (+1 with final norm)");
  }
  if (cotangent.rows() != trace.output.rows() || cotangent.cols() != trace.output.cols()) {
    throw ShapeError("cotangent shape does not match activations");
  }
  if (l_hi == l_lo) return cotangent;
  TokenMatrix g = cotangent;
  int l = l_hi;
  if (l == L + 1) {
    if (trace.final_output.size() == 0) throw DomainError("trace has no final normalization");
    g = normalize_vjp(trace.output, g, cfg);
    l = L;
  }
  for (int k = l - 1; k >= l_lo; --k) {
    const LayerCache& c = trace.layers[k];
    const BlockWeights& w = weights.blocks[k / 2];
    g += layer_kind(k) == LayerKind::Attention ? attention_vjp(c, w, cfg, g) : mlp_vjp(c, w, cfg, g);
  }
  return g;
}

SymmetricTokens generate_permutation_symmetric(double q0, double p0, int n, int d,
                                               std::uint64_t seed) {
  if (!(p0 >= 0.0) || !(p0 <= q0) || !(q0 > 0.0)) {
    throw DomainError("need 0 <= p0 <= q0 and q0 > 0");
  }
  if (n < 1 || d < 1) throw DomainError("n and d must be positive");
  SplitMix64 gen(derive_seed(seed, {stream::kTokens}));
  boost::random::normal_distribution<double> normal;
  Eigen::RowVectorXd shared(d);
  for (int j = 0; j < d; ++j) shared(j) = normal(gen);
  TokenMatrix x(n, d);
  const double a = std::sqrt(p0);
  const double b = std::sqrt(q0 - p0);
  for (int s = 0; s < n; ++s) {
    for (int j = 0; j < d; ++j) x(s, j) = a * shared(j) + b * normal(gen);
  }
  const CovPair stats = token_statistics(x);
  return {std::move(x), stats.q, stats.p};
}

CovPair token_statistics(const TokenMatrix& x) {
  const double n = static_cast<double>(x.rows());
  const double d = static_cast<double>(x.cols());
  const double diag = x.rowwise().squaredNorm().sum();
  const double total = x.colwise().sum().squaredNorm();
  const double q = diag / (n * d);
  const double p = n > 1 ? (total - diag) / (n * (n - 1) * d) : q;
  return {q, p};
}

void write_tokens_csv(std::ostream& os, const TokenMatrix& x) {
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (j) os << ',';
      os << format_double(x(i, j));
    }
    os << '\n';
  }
}

TokenMatrix read_tokens_csv(std::istream& is) {
  const CsvTable t = read_numeric_csv(is, false);
  if (t.rows.empty()) throw ShapeError("token CSV is empty");
  TokenMatrix x(t.rows.size(), t.rows.front().size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    for (std::size_t j = 0; j < t.rows[i].size(); ++j) x(i, j) = t.rows[i][j];
  }
  if (!x.allFinite()) throw ShapeError("token CSV contains non-finite entries");
  return x;
}

}  // namespace sigprop
