#include "sigprop/asymptotics.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "sigprop/csv.hpp"
#include "sigprop/errors.hpp"

namespace sigprop {
namespace {

constexpr double kPi = std::numbers::pi;

void check_cosine(double c) {
  if (!(c >= -kCorrelationTol && c <= 1.0 + kCorrelationTol)) {
    throw DomainError("cosine outside [0, 1]: " + std::to_string(c));
  }
}

}  // namespace

double p_tilde_limit(double c, const Nonlinearity& phi) {
  if (!phi.tanh_like()) return c;
  return 2.0 / kPi * std::asin(std::clamp(c, -1.0, 1.0));
}

Increments block_increments(double c, const ModelHyper& hyper) {
  check_cosine(c);
  const double half = 0.5 * hyper.sigma_21 * hyper.sigma_21;
  const double so2 = hyper.sigma_ov * hyper.sigma_ov;
  const double pt = p_tilde_limit(c, hyper.phi);
  return {half + so2 * pt, half * kappa(pt) + so2 * pt};
}

double g_of_c(double c, const ModelHyper& hyper) {
  const Increments inc = block_increments(c, hyper);
  return inc.dp - c * inc.dq;
}

double g_prime(double c, const ModelHyper& hyper) {
  check_cosine(c);
  const double half = 0.5 * hyper.sigma_21 * hyper.sigma_21;
  const double so2 = hyper.sigma_ov * hyper.sigma_ov;
  const double pt = p_tilde_limit(c, hyper.phi);
  double dpt = 1.0;
  if (hyper.phi.tanh_like()) {
    if (c >= 1.0) return -std::numeric_limits<double>::infinity();
    dpt = 2.0 / (kPi * std::sqrt(1.0 - c * c));
  }
  return dpt * (half * kappa_prime(pt) + (1.0 - c) * so2) - half - so2 * pt;
}

FixedPointReport solve_c_star(const ModelHyper& hyper) {
  hyper.validate();
  FixedPointReport r;
  if (!hyper.phi.tanh_like()) {
    r.c_star = 1.0;
    r.p_tilde_star = 1.0;
    r.g_prime = g_prime(1.0, hyper);
    const double dq = block_increments(1.0, hyper).dq;
    r.mu = dq > 0.0 ? -r.g_prime / dq : 0.0;
    r.stable = r.g_prime < 0.0;
    return r;
  }
  double lo = 0.0;
  double hi = 1.0 - kBracketGap;
  double glo = g_of_c(lo, hyper);
  const double ghi = g_of_c(hi, hyper);
  if (!(glo > 0.0 && ghi < 0.0)) {
    throw NoInteriorRoot("g(c) has no sign change on [0, 1 - 1e-9] (g(0)=" + std::to_string(glo) +
                         ", g(1-1e-9)=" + std::to_string(ghi) + ")");
  }
  for (int it = 0; it < kBisectionMaxIter && hi - lo > kBisectionTol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g_of_c(mid, hyper);
    if (gm > 0.0) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  r.c_star = 0.5 * (lo + hi);
  r.p_tilde_star = p_tilde_limit(r.c_star, hyper.phi);
  const double h = std::min(kDerivativeStep, 0.5 * (1.0 - r.c_star));
  const double cl = std::max(r.c_star - h, 0.0);
  const double cr = r.c_star + h;
  r.g_prime = (g_of_c(cr, hyper) - g_of_c(cl, hyper)) / (cr - cl);
  r.mu = -r.g_prime / block_increments(r.c_star, hyper).dq;
  r.stable = r.g_prime < 0.0;
  return r;
}

const char* to_string(Regime regime) {
  return regime == Regime::CriticalPowerLaw ? "critical_powerlaw" : "subcritical_stretched";
}

AsymptoticLaw asymptotic_law(const ModelHyper& hyper) {
  return asymptotic_law(hyper, solve_c_star(hyper));
}

AsymptoticLaw asymptotic_law(const ModelHyper& hyper, const FixedPointReport& fp) {
  const double half = 0.5 * hyper.sigma_21 * hyper.sigma_21;
  const double so2 = hyper.sigma_ov * hyper.sigma_ov;
  AsymptoticLaw law;
  const Increments inc = block_increments(fp.c_star, hyper);
  law.q_slope = inc.dq;
  law.p_slope = inc.dp;
  if (!hyper.phi.tanh_like()) {
    law.regime = Regime::CriticalPowerLaw;
    law.zeta = half + so2 > 0.0 ? half / (half + so2) : 0.0;
  } else {
    law.regime = Regime::SubcriticalStretched;
    const double ca = c_alpha(hyper.phi);
    const double s4 = hyper.sigma_21 * hyper.sigma_21 * hyper.sigma_21 * hyper.sigma_21;
    law.lambda_inv = ca * ca * s4 / (half + so2 * fp.p_tilde_star);
  }
  return law;
}

double asymptotic_shape(const AsymptoticLaw& law, double b, double B, Direction direction) {
  if (!(b >= 1.0) || !(B >= b)) throw DomainError("need 1 <= b <= B");
  if (law.regime == Regime::CriticalPowerLaw) {
    return direction == Direction::Forward ? std::pow(b, law.zeta) : std::pow(B / b, law.zeta);
  }
  const double li = law.lambda_inv;
  if (direction == Direction::Forward) {
    return std::pow(b, -li / 8.0) * std::exp(std::sqrt(b * li));
  }
  return std::pow(B / b, -li / 8.0) * std::exp((std::sqrt(B) - std::sqrt(b)) * std::sqrt(li));
}

double asymptotic_curve(const AsymptoticLaw& law, double b, double B, Direction direction,
                        const std::optional<Anchor>& anchor) {
  const double shape = asymptotic_shape(law, b, B, direction);
  if (!anchor) return shape;
  // Ratio taken in log space: the stretched form overflows long before its ratios do.
  const double log_ratio =
      std::log(shape) - std::log(asymptotic_shape(law, anchor->block, B, direction));
  return anchor->value * std::exp(log_ratio);
}

PhaseRow phase_point(const ModelHyper& hyper) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  PhaseRow row{hyper.sigma_21, hyper.sigma_ov, hyper.phi.tanh_like() ? hyper.phi.alpha : nan,
               "", nan, nan, nan, nan};
  try {
    const FixedPointReport fp = solve_c_star(hyper);
    const AsymptoticLaw law = asymptotic_law(hyper, fp);
    row.regime = to_string(law.regime);
    if (law.regime == Regime::CriticalPowerLaw) {
      row.zeta = law.zeta;
    } else {
      row.lambda_inv = law.lambda_inv;
    }
    row.c_star = fp.c_star;
    row.mu = fp.mu;
  } catch (const NoInteriorRoot&) {
    row.regime = "no_interior_root";
  }
  return row;
}

void write_phase_csv(std::ostream& os, const std::vector<PhaseRow>& rows) {
  CsvWriter w(os, {"sigma_21", "sigma_ov", "alpha", "regime", "zeta", "lambda_inv", "c_star", "mu"});
  for (const auto& r : rows) {
    w.row(r.sigma_21, r.sigma_ov, r.alpha, r.regime, r.zeta, r.lambda_inv, r.c_star, r.mu);
  }
}

}  // namespace sigprop
