#include "sigprop/gaussian_kernels.hpp"

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <cmath>
#include <numbers>
#include <sstream>

#include "sigprop/errors.hpp"
#include "sigprop/quadrature.hpp"

namespace sigprop {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kBaseOrder = 64;
constexpr int kMaxOrder = 128;
constexpr double kQuadTol = 1e-9;

double clamp_correlation(double rho) {
  if (!(std::abs(rho) <= 1.0 + kCorrelationTol)) {
    throw DomainError("correlation outside [-1, 1]: " + std::to_string(rho));
  }
  return std::clamp(rho, -1.0, 1.0);
}

bool converged(double a, double b, double scale) {
  return std::abs(a - b) <= kQuadTol * std::max(std::abs(b), scale);
}

// Expectations of an elementwise map: Gauss–Hermite with order doubling, then a
// scale-aware composite rule when the map is too sharp at this variance.
struct PairExpectation {
  Fn1 diag;
  Fn2 cross;
  double feature_scale;

  CovPair operator()(const CovPair& cov) const {
    const double d64 = gh_expectation(diag, cov.q, kBaseOrder);
    const double d128 = gh_expectation(diag, cov.q, kMaxOrder);
    const double c64 = gh_expectation(cross, cov.q, cov.p, kBaseOrder);
    const double c128 = gh_expectation(cross, cov.q, cov.p, kMaxOrder);
    if (converged(d64, d128, 0.0) && converged(c64, c128, std::abs(d128))) return {d128, c128};

    const double d20 = composite_expectation(diag, cov.q, feature_scale, 20);
    const double d30 = composite_expectation(diag, cov.q, feature_scale, 30);
    const double c20 = composite_expectation(cross, cov.q, cov.p, feature_scale, 20);
    const double c30 = composite_expectation(cross, cov.q, cov.p, feature_scale, 30);
    if (converged(d20, d30, 0.0) && converged(c20, c30, std::abs(d30))) return {d30, c30};
    throw QuadratureError("Gaussian expectation did not converge at q=" + std::to_string(cov.q) +
                          ", p=" + std::to_string(cov.p));
  }
};

}  // namespace

CovPair CovPair::make(double q, double p) {
  if (!(q > 0.0) || !std::isfinite(q)) throw DomainError("q must be positive and finite");
  if (!std::isfinite(p)) throw DomainError("p must be finite");
  if (std::abs(p) > q) {
    if (std::abs(p) > q * (1.0 + kCorrelationTol)) {
      throw DomainError("|p| > q: not a valid covariance (q=" + std::to_string(q) +
                        ", p=" + std::to_string(p) + ")");
    }
    p = std::copysign(q, p);
  }
  return {q, p};
}

std::string to_string(NormKind kind) {
  switch (kind) {
    case NormKind::LayerNorm: return "layernorm";
    case NormKind::Erf: return "erf";
    case NormKind::Tanh: return "tanh";
  }
  return "?";
}

NormKind parse_norm_kind(const std::string& name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "layernorm" || s == "ln" || s == "rmsnorm") return NormKind::LayerNorm;
  if (s == "erf" || s == "derf") return NormKind::Erf;
  if (s == "tanh" || s == "dyt") return NormKind::Tanh;
  throw DomainError("unknown nonlinearity '" + name + "'");
}

void Nonlinearity::validate() const {
  if (tanh_like() && !(alpha > 0.0 && std::isfinite(alpha))) {
    throw DomainError("alpha must be positive for " + to_string(kind));
  }
}

std::string Nonlinearity::label() const {
  if (!tanh_like()) return "layernorm";
  std::ostringstream os;
  os << to_string(kind) << "(alpha=" << alpha << ")";
  return os.str();
}

double kappa(double rho) {
  rho = clamp_correlation(rho);
  return (std::sqrt(1.0 - rho * rho) + rho * (kPi - std::acos(rho))) / kPi;
}

double hat_kappa(double rho) {
  rho = clamp_correlation(rho);
  return 0.25 + std::asin(rho) / (2.0 * kPi);
}

double kappa_prime(double rho) {
  rho = clamp_correlation(rho);
  return (kPi - std::acos(rho)) / kPi;
}

double phi_value(const Nonlinearity& phi, double h) {
  switch (phi.kind) {
    case NormKind::Erf: return std::erf(phi.alpha * h);
    case NormKind::Tanh: return std::tanh(phi.alpha * h);
    case NormKind::LayerNorm: break;
  }
  throw DomainError("LayerNorm is not an elementwise map");
}

double phi_derivative(const Nonlinearity& phi, double h) {
  const double a = phi.alpha;
  switch (phi.kind) {
    case NormKind::Erf: return 2.0 * a / std::sqrt(kPi) * std::exp(-a * a * h * h);
    case NormKind::Tanh: {
      const double t = std::tanh(a * h);
      return a * (1.0 - t * t);
    }
    case NormKind::LayerNorm: break;
  }
  throw DomainError("LayerNorm is not an elementwise map");
}

CovPair propagate_phi_quadrature(const CovPair& in, const Nonlinearity& phi) {
  phi.validate();
  const CovPair cov = CovPair::make(in.q, in.p);
  PairExpectation e{
      [&](double h) { const double v = phi_value(phi, h); return v * v; },
      [&](double a, double b) { return phi_value(phi, a) * phi_value(phi, b); },
      1.0 / phi.alpha};
  return e(cov);
}

CovPair propagate_phi_prime_quadrature(const CovPair& in, const Nonlinearity& phi) {
  phi.validate();
  const CovPair cov = CovPair::make(in.q, in.p);
  PairExpectation e{
      [&](double h) { const double v = phi_derivative(phi, h); return v * v; },
      [&](double a, double b) { return phi_derivative(phi, a) * phi_derivative(phi, b); },
      1.0 / phi.alpha};
  return e(cov);
}

CovPair propagate_phi(const CovPair& in, const Nonlinearity& phi) {
  phi.validate();
  const CovPair cov = CovPair::make(in.q, in.p);
  switch (phi.kind) {
    case NormKind::LayerNorm:
      return {1.0, cov.p / cov.q};
    case NormKind::Erf: {
      const double a2 = phi.alpha * phi.alpha;
      const double denom = 1.0 + 2.0 * a2 * cov.q;
      const double qt = 2.0 / kPi * std::asin(2.0 * a2 * cov.q / denom);
      const double pt = 2.0 / kPi * std::asin(std::clamp(2.0 * a2 * cov.p / denom, -1.0, 1.0));
      return {qt, std::clamp(pt, -qt, qt)};
    }
    case NormKind::Tanh:
      return propagate_phi_quadrature(cov, phi);
  }
  throw DomainError("unknown nonlinearity");
}

CovPair propagate_phi_prime(const CovPair& in, const Nonlinearity& phi) {
  phi.validate();
  const CovPair cov = CovPair::make(in.q, in.p);
  switch (phi.kind) {
    case NormKind::LayerNorm:
      return {1.0 / cov.q, 1.0 / cov.q};
    case NormKind::Erf: {
      const double a2 = phi.alpha * phi.alpha;
      const double qh = 4.0 * a2 / (kPi * std::sqrt(1.0 + 4.0 * a2 * cov.q));
      const double s = 1.0 + 2.0 * a2 * cov.q;
      const double disc = (s - 2.0 * a2 * cov.p) * (s + 2.0 * a2 * cov.p);
      const double ph = 4.0 * a2 / (kPi * std::sqrt(disc));
      return {qh, std::min(ph, qh)};
    }
    case NormKind::Tanh:
      return propagate_phi_prime_quadrature(cov, phi);
  }
  throw DomainError("unknown nonlinearity");
}

double c_alpha(const Nonlinearity& phi) {
  phi.validate();
  switch (phi.kind) {
    case NormKind::Erf:
      return 2.0 * phi.alpha / kPi;
    case NormKind::Tanh: {
      boost::math::quadrature::exp_sinh<double> integrator;
      auto f = [&](double h) { const double v = phi_derivative(phi, h); return v * v; };
      const double half = integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity());
      return 2.0 * half / std::sqrt(2.0 * kPi);
    }
    case NormKind::LayerNorm:
      break;
  }
  throw DomainError("c_alpha is undefined for LayerNorm");
}

}  // namespace sigprop
