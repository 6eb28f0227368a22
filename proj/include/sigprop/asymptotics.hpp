#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sigprop/apjn_theory.hpp"
#include "sigprop/covariance_dynamics.hpp"

namespace sigprop {

/// Large-depth propagated cross covariance as a function of the cosine c.
double p_tilde_limit(double c, const Nonlinearity& phi);

/// Per-block increments of q and p once q is large.
struct Increments {
  double dq;
  double dp;
};
Increments block_increments(double c, const ModelHyper& hyper);

/// g(c) = dp(c) - c dq(c); its stable root is the asymptotic cosine.
double g_of_c(double c, const ModelHyper& hyper);
/// Closed-form derivative of g (diverges at c = 1 for tanh-like maps).
double g_prime(double c, const ModelHyper& hyper);

struct FixedPointReport {
  double c_star = 1.0;
  double p_tilde_star = 1.0;
  double g_prime = 0.0;
  double mu = 0.0;  // |c^b - c*| ~ b^{-mu}
  bool stable = false;
};

inline constexpr double kBracketGap = 1e-9;
inline constexpr double kBisectionTol = 1e-12;
inline constexpr int kBisectionMaxIter = 200;
inline constexpr double kDerivativeStep = 1e-6;

/// LayerNorm: c* = 1 with the closed-form derivative. Tanh-like: bisection on [0, 1 - 1e-9],
/// then mu from a central difference of g. Throws NoInteriorRoot when g keeps one sign.
FixedPointReport solve_c_star(const ModelHyper& hyper);

enum class Regime { CriticalPowerLaw, SubcriticalStretched };
const char* to_string(Regime regime);

struct AsymptoticLaw {
  Regime regime = Regime::CriticalPowerLaw;
  double zeta = 0.0;        // LayerNorm only
  double lambda_inv = 0.0;  // tanh-like only
  double q_slope = 0.0;
  double p_slope = 0.0;
};

AsymptoticLaw asymptotic_law(const ModelHyper& hyper);
AsymptoticLaw asymptotic_law(const ModelHyper& hyper, const FixedPointReport& fixed_point);

/// Asymptotic APJN shape with unit constant, writing r = lambda_inv:
///   power law:  forward b^zeta, backward (B/b)^zeta
///   stretched:  forward b^{-r/8} e^{sqrt(r b)}, backward (B/b)^{-r/8} e^{sqrt(r) (sqrt B - sqrt b)}
double asymptotic_shape(const AsymptoticLaw& law, double b, double B, Direction direction);

struct Anchor {
  double block;
  double value;
};

/// asymptotic_shape rescaled to pass through `anchor` when one is given.
double asymptotic_curve(const AsymptoticLaw& law, double b, double B, Direction direction,
                        const std::optional<Anchor>& anchor = std::nullopt);

struct PhaseRow {
  double sigma_21;
  double sigma_ov;
  double alpha;
  std::string regime;
  double zeta;
  double lambda_inv;
  double c_star;
  double mu;
};

PhaseRow phase_point(const ModelHyper& hyper);
void write_phase_csv(std::ostream& os, const std::vector<PhaseRow>& rows);

}  // namespace sigprop
