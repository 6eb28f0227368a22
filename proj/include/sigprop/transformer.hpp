#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "sigprop/covariance_dynamics.hpp"
#include "sigprop/gaussian_kernels.hpp"

namespace sigprop {

/// n x d activations, one token per row.
using TokenMatrix = Eigen::MatrixXd;

enum class AttentionMode { Softmax, Uniform };
const char* to_string(AttentionMode mode);
AttentionMode parse_attention_mode(const std::string& name);

/// ViT-Base scales: standard deviation 0.02 at d = 768 (hidden width 3072).
inline const double kVitSigma = 0.02 * std::sqrt(768.0);
inline const double kVitSigma2 = 0.02 * std::sqrt(3072.0);

struct TransformerConfig {
  int d = 64;
  int n = 8;
  int blocks = 2;
  int heads = 1;
  Nonlinearity norm;
  double sigma_o = kVitSigma;
  double sigma_v = kVitSigma;
  double sigma_q = kVitSigma;
  double sigma_k = kVitSigma;
  double sigma_1 = kVitSigma;
  double sigma_2 = kVitSigma2;
  bool final_norm = false;
  AttentionMode attention = AttentionMode::Softmax;
  std::uint64_t seed = 0;
  /// Subtract the feature mean inside LayerNorm (no theory counterpart).
  bool mean_subtracting_ln = false;

  int num_layers() const noexcept { return 2 * blocks; }
  /// Index of the last state: L, or L + 1 when the final normalization is applied.
  int output_state() const noexcept { return num_layers() + (final_norm ? 1 : 0); }
  int head_dim() const noexcept { return d / heads; }
  void validate() const;
  /// Theory parameters: sigma_ov = sigma_o sigma_v, sigma_21 = sigma_2 sigma_1.
  ModelHyper hyper(std::optional<int> context_n = std::nullopt) const;
};

/// Full d x d projections; head h reads rows [h d_h, (h+1) d_h) of wq, wk, wv and
/// columns of the same range of wo.
struct BlockWeights {
  Eigen::MatrixXd wq, wk, wv, wo;
  Eigen::MatrixXd w1;  // 4d x d
  Eigen::MatrixXd w2;  // d x 4d
};

struct Weights {
  std::vector<BlockWeights> blocks;
};

/// Deterministic in config.seed; each matrix draws from its own stream keyed by
/// (seed, block, matrix).
Weights init_weights(const TransformerConfig& config);

struct LayerCache {
  TokenMatrix input;   // h^l
  TokenMatrix normed;  // branch input after normalization
  std::vector<Eigen::MatrixXd> probs;  // attention, per head (empty in uniform mode)
  Eigen::MatrixXd q, k, v;             // attention projections
  Eigen::MatrixXd pre;                 // MLP pre-activation
};

struct ActivationTrace {
  std::vector<LayerCache> layers;  // l = 0 .. L-1
  TokenMatrix output;              // h^L
  TokenMatrix final_output;        // normalized h^L when final_norm is set

  int num_layers() const noexcept { return static_cast<int>(layers.size()); }
  /// State l in 0..L, or L + 1 for the final normalization output.
  const TokenMatrix& state(int l) const;
};

/// Runs all layers. Throws NumericalError with the layer index on non-finite activations.
ActivationTrace forward(const Weights& weights, const TokenMatrix& tokens,
                        const TransformerConfig& config);

/// Returns (J^{l_hi, l_lo})^T cotangent, where state L + 1 is the final-norm output.
TokenMatrix vjp(const ActivationTrace& trace, const Weights& weights,
                const TransformerConfig& config, const TokenMatrix& cotangent, int l_hi,
                int l_lo);

/// Like vjp down to state 0, calling visit(l, cotangent at state l) for l = l_hi .. 0.
void backpropagate(const ActivationTrace& trace, const Weights& weights,
                   const TransformerConfig& config, const TokenMatrix& cotangent, int l_hi,
                   const std::function<void(int, const TokenMatrix&)>& visit);

/// Normalization map and its VJP, exposed for testing.
TokenMatrix normalize(const TokenMatrix& x, const TransformerConfig& config);
TokenMatrix normalize_vjp(const TokenMatrix& x, const TokenMatrix& dy,
                          const TransformerConfig& config);

struct SymmetricTokens {
  TokenMatrix tokens;
  double empirical_q;
  double empirical_p;
};

/// h_s = sqrt(p0) g + sqrt(q0 - p0) g_s with standard Gaussian g, g_s.
SymmetricTokens generate_permutation_symmetric(double q0, double p0, int n, int d,
                                               std::uint64_t seed);

/// Position-averaged normalized self and cross dot products of a token matrix.
CovPair token_statistics(const TokenMatrix& tokens);

void write_tokens_csv(std::ostream& os, const TokenMatrix& tokens);
TokenMatrix read_tokens_csv(std::istream& is);

}  // namespace sigprop
