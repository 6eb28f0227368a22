#pragma once

// Independent reference computations used by the unit tests and the acceptance suite.

#include <cstdint>

#include "sigprop/gaussian_kernels.hpp"
#include "sigprop/transformer.hpp"

namespace sigprop::oracle {

struct McEstimate {
  double mean;
  double std_error;
};

/// 2 E[relu(z1) relu(z2)] for unit-variance Gaussians with correlation rho.
McEstimate mc_kappa(double rho, int samples, std::uint64_t seed);
/// E[1(z1 > 0) 1(z2 > 0)].
McEstimate mc_hat_kappa(double rho, int samples, std::uint64_t seed);

/// E[f(h1) f(h2)] under [[q, p], [p, q]] by nested adaptive Gauss–Kronrod (no Hermite nodes).
double adaptive_pair_expectation(const std::function<double(double)>& f, double q, double p);

/// Damped iteration for c = kappa(p~(c)) with the arcsine p~ (sigma_ov = 0 fixed point).
double damped_fixed_point(double c0, double damping, int iterations);

/// Output of the network at state l_hi as a function of the input tokens.
TokenMatrix network_map(const Weights& weights, const TokenMatrix& tokens,
                        const TransformerConfig& config, int l_hi);

/// <v, (F(x + h u) - F(x - h u)) / 2h> for F = network_map to state l_hi.
double fd_directional(const Weights& weights, const TokenMatrix& tokens,
                      const TransformerConfig& config, int l_hi, const TokenMatrix& u,
                      const TokenMatrix& v, double step);

/// ||J||_F^2 / (n d) of the input-to-state-l_hi map by central differences on every input.
double fd_apjn(const Weights& weights, const TokenMatrix& tokens, const TransformerConfig& config,
               int l_hi, double step);

/// Least-squares slope of y against x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Standard Gaussian matrix from a seed.
TokenMatrix gaussian_tokens(int rows, int cols, std::uint64_t seed);

}  // namespace sigprop::oracle
