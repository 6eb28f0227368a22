#include "oracles.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/random/normal_distribution.hpp>
#include <cmath>
#include <numbers>

#include "sigprop/rng.hpp"

namespace sigprop::oracle {
namespace {

template <typename F>
McEstimate mc_correlated(double rho, int samples, std::uint64_t seed, F f) {
  SplitMix64 gen(seed);
  boost::random::normal_distribution<double> normal;
  const double c = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double z1 = normal(gen);
    const double z2 = rho * z1 + c * normal(gen);
    const double v = f(z1, z2);
    s += v;
    s2 += v * v;
  }
  const double m = s / samples;
  const double var = (s2 - samples * m * m) / (samples - 1);
  return {m, std::sqrt(std::max(var, 0.0) / samples)};
}

}  // namespace

McEstimate mc_kappa(double rho, int samples, std::uint64_t seed) {
  return mc_correlated(rho, samples, seed, [](double a, double b) {
    return 2.0 * std::max(a, 0.0) * std::max(b, 0.0);
  });
}

McEstimate mc_hat_kappa(double rho, int samples, std::uint64_t seed) {
  return mc_correlated(rho, samples, seed,
                       [](double a, double b) { return (a > 0.0 && b > 0.0) ? 1.0 : 0.0; });
}

double adaptive_pair_expectation(const std::function<double(double)>& f, double q, double p) {
  using boost::math::quadrature::gauss_kronrod;
  const double l11 = std::sqrt(q);
  const double l21 = p / l11;
  const double l22 = std::sqrt(std::max(q - l21 * l21, 0.0));
  const double pdf_norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  auto outer = [&](double z1) {
    auto inner = [&](double z2) { return pdf_norm * std::exp(-0.5 * z2 * z2) * f(l21 * z1 + l22 * z2); };
    const double in = gauss_kronrod<double, 61>::integrate(inner, -12.0, 12.0, 15, 1e-14);
    return pdf_norm * std::exp(-0.5 * z1 * z1) * f(l11 * z1) * in;
  };
  return gauss_kronrod<double, 61>::integrate(outer, -12.0, 12.0, 15, 1e-14);
}

double damped_fixed_point(double c, double damping, int iterations) {
  for (int i = 0; i < iterations; ++i) {
    const double target = kappa(2.0 / std::numbers::pi * std::asin(c));
    c = (1.0 - damping) * c + damping * target;
  }
  return c;
}

TokenMatrix network_map(const Weights& weights, const TokenMatrix& tokens,
                        const TransformerConfig& config, int l_hi) {
  return forward(weights, tokens, config).state(l_hi);
}

double fd_directional(const Weights& weights, const TokenMatrix& tokens,
                      const TransformerConfig& config, int l_hi, const TokenMatrix& u,
                      const TokenMatrix& v, double step) {
  const TokenMatrix plus = network_map(weights, tokens + step * u, config, l_hi);
  const TokenMatrix minus = network_map(weights, tokens - step * u, config, l_hi);
  return (v.array() * (plus - minus).array()).sum() / (2.0 * step);
}

double fd_apjn(const Weights& weights, const TokenMatrix& tokens, const TransformerConfig& config,
               int l_hi, double step) {
  TokenMatrix x = tokens;
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x.data()[i];
    x.data()[i] = keep + step;
    const TokenMatrix plus = network_map(weights, x, config, l_hi);
    x.data()[i] = keep - step;
    const TokenMatrix minus = network_map(weights, x, config, l_hi);
    x.data()[i] = keep;
    total += ((plus - minus) / (2.0 * step)).squaredNorm();
  }
  return total / static_cast<double>(x.size());
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

TokenMatrix gaussian_tokens(int rows, int cols, std::uint64_t seed) {
  SplitMix64 gen(seed);
  boost::random::normal_distribution<double> normal;
  TokenMatrix x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(gen);
  return x;
}

}  // namespace sigprop::oracle
