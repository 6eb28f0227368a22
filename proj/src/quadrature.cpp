#include "sigprop/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "sigprop/errors.hpp"

namespace sigprop {
namespace {

constexpr double kTailRadius = 9.0;  // standard-normal mass beyond 9 sigma is ~1e-19
constexpr double kMaxPanel = 0.5;

// Orthonormal Hermite values p_{n-1}(x), p_n(x) for the weight e^{-x^2}.
std::pair<double, double> hermite_pair(int n, double x) {
  double prev = 0.0;
  double cur = 1.0 / std::pow(std::numbers::pi, 0.25);
  for (int k = 0; k < n; ++k) {
    const double next = x * std::sqrt(2.0 / (k + 1)) * cur - std::sqrt(double(k) / (k + 1)) * prev;
    prev = cur;
    cur = next;
  }
  return {prev, cur};
}

QuadratureRule build_rule(int n) {
  // Golub–Welsch for the initial nodes, then Newton on the three-term recurrence.
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(std::max(n - 1, 0));
  for (int k = 1; k < n; ++k) sub(k - 1) = std::sqrt(k / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);

  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = solver.eigenvalues()(i);
    for (int it = 0; it < 8; ++it) {
      auto [pm1, pn] = hermite_pair(n, x);
      const double dx = pn / (std::sqrt(2.0 * n) * pm1);
      x -= dx;
      if (std::abs(dx) <= 1e-16 * std::max(1.0, std::abs(x))) break;
    }
    const double pm1 = hermite_pair(n, x).first;
    rule.nodes[i] = x;
    rule.weights[i] = 1.0 / (n * pm1 * pm1);
  }
  // Symmetrize to remove rounding asymmetry.
  for (int i = 0; i < n / 2; ++i) {
    const int j = n - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

template <int N>
double legendre_panels(const std::vector<double>& bp, const Fn1& g) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
    total += boost::math::quadrature::gauss<double, N>::integrate(g, bp[i], bp[i + 1]);
  }
  return total;
}

double panels(int order, const std::vector<double>& bp, const Fn1& g) {
  switch (order) {
    case 10: return legendre_panels<10>(bp, g);
    case 15: return legendre_panels<15>(bp, g);
    case 20: return legendre_panels<20>(bp, g);
    case 30: return legendre_panels<30>(bp, g);
    default: throw DomainError("unsupported panel order " + std::to_string(order));
  }
}

double std_normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

const QuadratureRule& gauss_hermite(int order) {
  if (order < 1) throw DomainError("quadrature order must be positive");
  static std::mutex mu;
  static std::map<int, std::unique_ptr<QuadratureRule>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[order];
  if (!slot) slot = std::make_unique<QuadratureRule>(build_rule(order));
  return *slot;
}

Cholesky2 Cholesky2::of(double q, double p) {
  const double l11 = std::sqrt(q);
  const double l21 = p / l11;
  return {l11, l21, std::sqrt(std::max(q - l21 * l21, 0.0))};
}

double gh_expectation(const Fn1& f, double var, int order) {
  const auto& r = gauss_hermite(order);
  const double s = std::sqrt(2.0 * var);
  double acc = 0.0;
  for (int i = 0; i < r.order(); ++i) acc += r.weights[i] * f(s * r.nodes[i]);
  return acc / std::sqrt(std::numbers::pi);
}

double gh_expectation(const Fn2& f, double q, double p, int order) {
  const auto& r = gauss_hermite(order);
  const auto c = Cholesky2::of(q, p);
  double acc = 0.0;
  for (int i = 0; i < r.order(); ++i) {
    const double z1 = std::sqrt(2.0) * r.nodes[i];
    const double h1 = c.l11 * z1;
    double inner = 0.0;
    for (int j = 0; j < r.order(); ++j) {
      inner += r.weights[j] * f(h1, c.l21 * z1 + c.l22 * std::sqrt(2.0) * r.nodes[j]);
    }
    acc += r.weights[i] * inner;
  }
  return acc / std::numbers::pi;
}

std::vector<double> clustered_breakpoints(double center, double width, double radius,
                                          double max_panel) {
  std::vector<double> bp{-radius, radius};
  auto add = [&](double x) {
    if (x > -radius && x < radius) bp.push_back(x);
  };
  add(center);
  for (double w = width; w < 2.0 * radius + std::abs(center); w *= 2.0) {
    add(center - w);
    add(center + w);
  }
  std::sort(bp.begin(), bp.end());
  std::vector<double> out{bp.front()};
  for (std::size_t i = 1; i < bp.size(); ++i) {
    const double a = out.back();
    const double b = bp[i];
    if (b - a <= 1e-15 * radius) continue;
    const int pieces = static_cast<int>(std::ceil((b - a) / max_panel));
    for (int k = 1; k < pieces; ++k) out.push_back(a + (b - a) * k / pieces);
    out.push_back(b);
  }
  return out;
}

double composite_expectation(const Fn1& f, double var, double feature_scale, int panel_order) {
  const double s = std::sqrt(var);
  const auto bp = clustered_breakpoints(0.0, feature_scale / s, kTailRadius, kMaxPanel);
  return panels(panel_order, bp, [&](double z) { return std_normal_pdf(z) * f(s * z); });
}

double composite_expectation(const Fn2& f, double q, double p, double feature_scale,
                             int panel_order) {
  const auto c = Cholesky2::of(q, p);
  if (c.l22 <= 1e-12 * c.l11) {
    const double sign = p >= 0 ? 1.0 : -1.0;
    return composite_expectation([&](double h) { return f(h, sign * h); }, q, feature_scale,
                                 panel_order);
  }
  const auto outer_bp = clustered_breakpoints(0.0, feature_scale / c.l11, kTailRadius, kMaxPanel);
  auto outer = [&](double z1) {
    const double h1 = c.l11 * z1;
    const double center = -c.l21 * z1 / c.l22;
    const auto inner_bp = clustered_breakpoints(center, feature_scale / c.l22, kTailRadius, kMaxPanel);
    const double inner = panels(panel_order, inner_bp, [&](double z2) {
      return std_normal_pdf(z2) * f(h1, c.l21 * z1 + c.l22 * z2);
    });
    return std_normal_pdf(z1) * inner;
  };
  return panels(panel_order, outer_bp, outer);
}

}  // namespace sigprop
