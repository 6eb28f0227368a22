#pragma once

#include <functional>
#include <memory>
#include <vector>

namespace sigprop {

/// Gauss–Hermite rule for the weight e^{-x^2}; weights sum to sqrt(pi).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  int order() const noexcept { return static_cast<int>(nodes.size()); }
};

/// Cached rule of the given order (>= 1). Thread-safe; the returned reference stays valid.
const QuadratureRule& gauss_hermite(int order);

/// Lower-triangular square root of [[q, p], [p, q]].
struct Cholesky2 {
  double l11, l21, l22;
  static Cholesky2 of(double q, double p);
};

using Fn1 = std::function<double(double)>;
using Fn2 = std::function<double(double, double)>;

/// E[f(h)] for h ~ N(0, var) with a fixed Gauss–Hermite rule.
double gh_expectation(const Fn1& f, double var, int order);

/// E[f(h1, h2)] for (h1, h2) ~ N(0, [[q, p], [p, q]]) on a tensor-product rule.
double gh_expectation(const Fn2& f, double q, double p, int order);

/// Composite Gauss–Legendre estimate of E[f(h)], with panels clustered where f varies on
/// `feature_scale` around h = 0 (used when f is too sharp for Gauss–Hermite).
double composite_expectation(const Fn1& f, double var, double feature_scale, int panel_order);
double composite_expectation(const Fn2& f, double q, double p, double feature_scale,
                             int panel_order);

/// Panel breakpoints on [-radius, radius]: geometric around `center` starting at `width`,
/// no panel longer than `max_panel`.
std::vector<double> clustered_breakpoints(double center, double width, double radius,
                                          double max_panel);

}  // namespace sigprop
