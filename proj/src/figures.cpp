#include <cmath>
#include <fstream>

#include "sigprop/apjn_theory.hpp"
#include "sigprop/asymptotics.hpp"
#include "sigprop/csv.hpp"
#include "sigprop/errors.hpp"
#include "sigprop/harness.hpp"

namespace sigprop {
namespace {

std::ofstream open_csv(Manifest& m, const std::string& name) {
  const auto path = m.file(name);
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  return os;
}

std::vector<double> linspace(double a, double b, int k) {
  std::vector<double> out;
  for (int i = 0; i < k; ++i) out.push_back(a + (b - a) * i / (k - 1));
  return out;
}

// fig1a: backward APJN, theory vs. simulator, for pre-LN and each Derf alpha.
void fig1a(const ExperimentConfig& cfg, Manifest& m) {
  std::vector<std::pair<std::string, ExperimentConfig>> variants;
  ExperimentConfig ln = cfg;
  ln.hyper.phi = Nonlinearity::layer_norm();
  variants.emplace_back("layernorm", ln);
  for (double a : cfg.alphas) {
    ExperimentConfig e = cfg;
    e.hyper.phi = Nonlinearity::erf(a);
    variants.emplace_back("erf", e);
  }
  auto curves = open_csv(m, "fig1a.csv");
  auto summary = open_csv(m, "fig1a_gmfe.csv");
  CsvWriter c(curves, {"variant", "alpha", "block", "theory_backward", "measured_backward", "std_error"});
  CsvWriter s(summary, {"variant", "alpha", "gmfe_early", "gmfe_middle", "gmfe_deep"});
  for (auto& [name, v] : variants) {
    v.mode = Mode::Compare;
    v.explicit_keys.erase("sigma_ov");
    v.explicit_keys.erase("sigma_21");
    const CompareResult r = compare_backward(v);
    const double alpha = v.hyper.phi.tanh_like() ? v.hyper.phi.alpha : std::nan("");
    for (int b = 0; b <= v.blocks; ++b) {
      c.row(name, alpha, b, r.theory_backward[b], r.measured_backward[b], r.std_error[b]);
    }
    s.row(name, alpha, r.region_gmfe[0], r.region_gmfe[1], r.region_gmfe[2]);
  }
}

// fig2: theory APJNs with the asymptotic laws anchored at the middle block.
void fig2(const ExperimentConfig& cfg, Manifest& m) {
  const int B = cfg.blocks;
  const CovTrajectory traj = run_trajectory(cfg.initial, cfg.hyper, B);
  const ApjnCurve fwd = forward_simplified(traj, cfg.hyper);
  const ApjnCurve bwd = backward_simplified(traj, cfg.hyper);
  const AsymptoticLaw law = asymptotic_law(cfg.hyper);
  const int anchor = std::max(1, B / 2);
  const Anchor af{double(anchor), fwd.value(2 * anchor)};
  const Anchor ab{double(anchor), bwd.value(2 * anchor)};
  auto os = open_csv(m, "fig2.csv");
  CsvWriter c(os, {"block", "j_forward", "j_backward", "asymptotic_forward", "asymptotic_backward"});
  for (int b = 1; b <= B; ++b) {
    c.row(b, fwd.value(2 * b), bwd.value(2 * b),
          asymptotic_curve(law, b, B, Direction::Forward, af),
          asymptotic_curve(law, b, B, Direction::Backward, ab));
  }
}

std::vector<ModelHyper> phase_grid(const ExperimentConfig& cfg, Nonlinearity phi) {
  const auto s21 = cfg.sweep.sigma_21.empty() ? linspace(0.1, 2.0, 20) : cfg.sweep.sigma_21;
  const auto sov = cfg.sweep.sigma_ov.empty() ? linspace(0.0, 2.0, 21) : cfg.sweep.sigma_ov;
  std::vector<ModelHyper> out;
  for (double s : s21) {
    for (double o : sov) out.push_back({o, s, std::nullopt, phi});
  }
  return out;
}

// fig4a: lambda^{-1} over (sigma_21, sigma_ov) for an elementwise map.
void fig4a(const ExperimentConfig& cfg, Manifest& m) {
  const Nonlinearity phi = cfg.hyper.phi.tanh_like() ? cfg.hyper.phi : Nonlinearity::erf(cfg.hyper.phi.alpha);
  const auto grid = phase_grid(cfg, phi);
  std::vector<PhaseRow> rows(grid.size());
  parallel_for(static_cast<int>(grid.size()), cfg.threads, [&](int i) { rows[i] = phase_point(grid[i]); });
  auto os = open_csv(m, "fig4a.csv");
  CsvWriter c(os, {"sigma_21", "sigma_ov", "alpha", "lambda_inv", "c_star"});
  for (const auto& r : rows) c.row(r.sigma_21, r.sigma_ov, r.alpha, r.lambda_inv, r.c_star);
}

// fig4b: critical exponent zeta for pre-LN.
void fig4b(const ExperimentConfig& cfg, Manifest& m) {
  const auto grid = phase_grid(cfg, Nonlinearity::layer_norm());
  auto os = open_csv(m, "fig4b.csv");
  CsvWriter c(os, {"sigma_21", "sigma_ov", "zeta"});
  for (const auto& h : grid) c.row(h.sigma_21, h.sigma_ov, asymptotic_law(h).zeta);
}

// fig6: K/J ratio along the extended recursions at finite context size.
void fig6(const ExperimentConfig& cfg, Manifest& m) {
  ModelHyper h = cfg.hyper;
  if (!h.context_n) h.context_n = 196;
  const CovTrajectory traj = run_trajectory(cfg.initial, h, cfg.blocks);
  const auto fx = forward_extended(traj, h);
  const auto bx = backward_extended(traj, h, {cfg.swap_coupling});
  auto os = open_csv(m, "fig6.csv");
  CsvWriter c(os, {"block", "k_over_j_forward", "k_over_j_backward", "j_forward", "j_backward"});
  for (int b = 0; b <= cfg.blocks; ++b) {
    const int l = 2 * b;
    c.row(b, fx[l].k_over_j, bx[l].k_over_j, fx[l].j(), bx[l].j());
  }
}

}  // namespace

const std::vector<std::string>& figure_tags() {
  static const std::vector<std::string> tags{"fig1a", "fig2", "fig4a", "fig4b", "fig6"};
  return tags;
}

RunResult emit_figure_data(const std::string& which, const ExperimentConfig& cfg) {
  return guarded([&] {
    if (std::find(figure_tags().begin(), figure_tags().end(), which) == figure_tags().end()) {
      throw ConfigError("figure", "unknown figure tag '" + which + "'");
    }
    ExperimentConfig checked = cfg;
    if (which == "fig1a") {
      checked.mode = Mode::Compare;
      checked.explicit_keys.erase("sigma_ov");
      checked.explicit_keys.erase("sigma_21");
    }
    checked.validate();
    Manifest m(cfg.out, which, cfg);
    try {
      if (which == "fig1a") fig1a(cfg, m);
      if (which == "fig2") fig2(cfg, m);
      if (which == "fig4a") fig4a(cfg, m);
      if (which == "fig4b") fig4b(cfg, m);
      if (which == "fig6") fig6(cfg, m);
      m.complete();
      return RunResult{exit_code::kOk, m.files(), ""};
    } catch (const std::exception& e) {
      m.fail(e.what());
      throw;
    }
  });
}

}  // namespace sigprop
