#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "sigprop/transformer.hpp"

namespace sigprop {

enum class ProbeKind { Gaussian, Rademacher };

struct EstimatorOptions {
  int n_probes = 10;
  int n_seeds = 4;
  ProbeKind probe = ProbeKind::Gaussian;
  int threads = 1;
};

struct ApjnEstimate {
  int l_lo = 0;
  int l_hi = 0;
  double value = 0.0;
  /// Standard error of `value`: spread of per-seed means when n_seeds >= 2,
  /// otherwise spread of the probes.
  double std_error = 0.0;
  int n_probes = 0;
  int n_seeds = 0;
  std::vector<double> per_seed;  // mean over probes for each weight seed
};

/// Inputs for weight seed s (0-based).
using TokenSource = std::function<TokenMatrix(int seed_index)>;
TokenSource fixed_tokens(TokenMatrix tokens);

/// Seed used for the s-th weight draw of an ensemble rooted at config.seed.
std::uint64_t ensemble_seed(const TransformerConfig& config, int seed_index);

/// Hutchinson estimate of ||J^{l_hi, l_lo}||_F^2 / (n d), averaged over weight seeds.
ApjnEstimate hutchinson_apjn(const TransformerConfig& config, const TokenSource& tokens, int l_lo,
                             int l_hi, const EstimatorOptions& options);

/// Backward profile J^{l_hi, l} for every l = 0..l_hi from one backward pass per probe.
std::vector<ApjnEstimate> hutchinson_backward_profile(const TransformerConfig& config,
                                                      const TokenSource& tokens, int l_hi,
                                                      const EstimatorOptions& options);

/// Per-probe values ||J^T v||^2 / (n d) for a single weight draw (exposed for convergence studies).
std::vector<double> hutchinson_samples(const ActivationTrace& trace, const Weights& weights,
                                       const TransformerConfig& config, int l_lo, int l_hi,
                                       int n_probes, ProbeKind probe, std::uint64_t probe_seed);

/// Exact ||J||_F^2 / (n d) assembled from n d unit-vector VJPs.
double exact_apjn(const ActivationTrace& trace, const Weights& weights,
                  const TransformerConfig& config, int l_lo, int l_hi);

struct ActivationStats {
  double q_bar = 0.0;
  double p_bar = 0.0;
  double delta_q = 0.0;  // standard deviation of self dots across positions
  double delta_p = 0.0;  // standard deviation of cross dots across pairs
};

ActivationStats measure_covariance(const ActivationTrace& trace, int block);
ActivationStats token_activation_stats(const TokenMatrix& tokens);

/// exp(mean |log(theory / measured)|). Throws DomainError on non-positive entries.
double gmfe(const std::vector<double>& theory, const std::vector<double>& measured);

/// GMFE over blocks [1, B/3], (B/3, 2B/3], (2B/3, B-1]; inputs indexed by block 0..B.
std::array<double, 3> region_gmfe(const std::vector<double>& theory,
                                  const std::vector<double>& measured);
int region_of_block(int b, int blocks);

struct AmplificationRatios {
  std::vector<double> to_last_block;  // E|g_b|^2 / E|g_B|^2, b = 0..B
  std::vector<double> to_output;      // E|g_b|^2 / E|g_out|^2
};

/// Gradient of a square loss on a fixed Gaussian readout of the mean output token.
AmplificationRatios gradient_amplification(const TransformerConfig& config,
                                           const std::vector<TokenMatrix>& batch,
                                           std::uint64_t readout_seed, int n_seeds, int threads = 1);

void write_measurements_csv(std::ostream& os, const std::vector<ApjnEstimate>& estimates);

/// Runs body(i) for i in [0, count) on up to `threads` workers.
void parallel_for(int count, int threads, const std::function<void(int)>& body);

}  // namespace sigprop
