#pragma once

#include <string>

namespace sigprop {

/// Normalized self dot product q and cross-position dot product p.
struct CovPair {
  double q = 1.0;
  double p = 0.0;

  /// Validated pair: q > 0 and |p| <= q, with |p| clamped to q when it exceeds it
  /// by no more than 1e-12 relative. Throws DomainError otherwise.
  static CovPair make(double q, double p);
  double cosine() const noexcept { return p / q; }
};

enum class NormKind { LayerNorm, Erf, Tanh };

std::string to_string(NormKind kind);
NormKind parse_norm_kind(const std::string& name);

/// Residual-branch input map. LayerNorm is the RMS form; alpha is ignored for it.
struct Nonlinearity {
  NormKind kind = NormKind::LayerNorm;
  double alpha = 1.0;

  static Nonlinearity layer_norm() { return {NormKind::LayerNorm, 1.0}; }
  static Nonlinearity erf(double alpha) { return {NormKind::Erf, alpha}; }
  static Nonlinearity tanh(double alpha) { return {NormKind::Tanh, alpha}; }

  bool tanh_like() const noexcept { return kind != NormKind::LayerNorm; }
  void validate() const;
  std::string label() const;
};

inline constexpr double kCorrelationTol = 1e-12;

/// ReLU arc-cosine kernel (1/pi)(sqrt(1 - rho^2) + rho (pi - arccos rho)).
double kappa(double rho);
/// Derivative kernel 1/4 + arcsin(rho) / (2 pi).
double hat_kappa(double rho);
/// d kappa / d rho = (pi - arccos rho) / pi.
double kappa_prime(double rho);

/// Covariance (q~, p~) of phi(h) for (h_1, h_2) with covariance [[q, p], [p, q]].
CovPair propagate_phi(const CovPair& cov, const Nonlinearity& phi);
/// Covariance (q^, p^) of phi'(h), the elementwise derivative.
CovPair propagate_phi_prime(const CovPair& cov, const Nonlinearity& phi);

/// Quadrature path for the elementwise maps (also valid for Erf; used as a cross-check).
CovPair propagate_phi_quadrature(const CovPair& cov, const Nonlinearity& phi);
CovPair propagate_phi_prime_quadrature(const CovPair& cov, const Nonlinearity& phi);

/// (1/sqrt(2 pi)) * integral of phi'(h)^2 over the real line; linear in alpha.
double c_alpha(const Nonlinearity& phi);

/// Elementwise phi and its derivative (Erf, Tanh only).
double phi_value(const Nonlinearity& phi, double h);
double phi_derivative(const Nonlinearity& phi, double h);

}  // namespace sigprop
