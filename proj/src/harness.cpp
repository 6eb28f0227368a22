#include "sigprop/harness.hpp"

#include <fstream>
#include <json.hpp>

#include "sigprop/apjn_theory.hpp"
#include "sigprop/asymptotics.hpp"
#include "sigprop/csv.hpp"
#include "sigprop/errors.hpp"
#include "sigprop/rng.hpp"

namespace sigprop {
namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  return os;
}

const char* region_name(int r) {
  static const char* names[] = {"early", "middle", "deep"};
  return names[r];
}

void run_theory(const ExperimentConfig& cfg, Manifest& m) {
  const CovTrajectory traj = run_trajectory(cfg.initial, cfg.hyper, cfg.blocks);
  {
    auto os = open_out(m.file("trajectory.csv"));
    traj.write_csv(os);
  }
  auto os = open_out(m.file("curves.csv"));
  write_curves_csv(os, traj, cfg.hyper);
}

std::vector<ModelHyper> grid_hypers(const ExperimentConfig& cfg) {
  const auto s21 = cfg.sweep.sigma_21.empty() ? std::vector<double>{cfg.hyper.sigma_21} : cfg.sweep.sigma_21;
  const auto sov = cfg.sweep.sigma_ov.empty() ? std::vector<double>{cfg.hyper.sigma_ov} : cfg.sweep.sigma_ov;
  const auto al = cfg.sweep.alpha.empty() || !cfg.hyper.phi.tanh_like()
                      ? std::vector<double>{cfg.hyper.phi.alpha}
                      : cfg.sweep.alpha;
  std::vector<ModelHyper> out;
  for (double a : al) {
    for (double s : s21) {
      for (double o : sov) {
        ModelHyper h = cfg.hyper;
        h.sigma_21 = s;
        h.sigma_ov = o;
        h.phi.alpha = a;
        out.push_back(h);
      }
    }
  }
  return out;
}

void run_asymptotics(const ExperimentConfig& cfg, Manifest& m) {
  const auto hypers = grid_hypers(cfg);
  std::vector<PhaseRow> rows(hypers.size());
  parallel_for(static_cast<int>(hypers.size()), cfg.threads,
               [&](int i) { rows[i] = phase_point(hypers[i]); });
  auto os = open_out(m.file("phase_map.csv"));
  write_phase_csv(os, rows);
}

void run_simulate(const ExperimentConfig& cfg, Manifest& m) {
  const TransformerConfig sim = cfg.sim_config();
  const TokenSource tokens = make_token_source(cfg);
  const int top = sim.output_state();
  EstimatorOptions opt = cfg.estimator;
  opt.threads = cfg.threads;

  std::vector<ApjnEstimate> rows = hutchinson_backward_profile(sim, tokens, top, opt);
  std::reverse(rows.begin(), rows.end());
  for (int b = 1; b <= sim.blocks; ++b) rows.push_back(hutchinson_apjn(sim, tokens, 0, 2 * b, opt));
  {
    auto os = open_out(m.file("measurements.csv"));
    write_measurements_csv(os, rows);
  }

  // Activation statistics per block: mean over seeds of the within-sample values,
  // and the across-sample spread of the position averages.
  const int S = opt.n_seeds;
  std::vector<std::vector<ActivationStats>> stats(S);
  parallel_for(S, cfg.threads, [&](int s) {
    TransformerConfig c = sim;
    c.seed = ensemble_seed(sim, s);
    const Weights w = init_weights(c);
    const ActivationTrace trace = forward(w, tokens(s), c);
    for (int b = 0; b <= c.blocks; ++b) stats[s].push_back(measure_covariance(trace, b));
  });
  auto os = open_out(m.file("covariance.csv"));
  CsvWriter csv(os, {"block", "q_bar", "p_bar", "delta_q", "delta_p", "q_bar_sd", "p_bar_sd"});
  for (int b = 0; b <= sim.blocks; ++b) {
    double q = 0, p = 0, dq = 0, dp = 0, q2 = 0, p2 = 0;
    for (int s = 0; s < S; ++s) {
      const auto& st = stats[s][b];
      q += st.q_bar;
      p += st.p_bar;
      dq += st.delta_q;
      dp += st.delta_p;
      q2 += st.q_bar * st.q_bar;
      p2 += st.p_bar * st.p_bar;
    }
    q /= S;
    p /= S;
    const double qsd = S > 1 ? std::sqrt(std::max(0.0, (q2 - S * q * q) / (S - 1))) : 0.0;
    const double psd = S > 1 ? std::sqrt(std::max(0.0, (p2 - S * p * p) / (S - 1))) : 0.0;
    csv.row(b, q, p, dq / S, dp / S, qsd, psd);
  }
}

void write_compare(const ExperimentConfig& cfg, const CompareResult& r, Manifest& m) {
  const int B = cfg.blocks;
  {
    auto os = open_out(m.file("compare.csv"));
    CsvWriter csv(os, {"block", "region", "theory_forward", "theory_backward", "theory_total",
                       "measured_backward", "std_error"});
    for (int b = 0; b <= B; ++b) {
      const int reg = region_of_block(b, B);
      csv.row(b, reg < 0 ? "endpoint" : region_name(reg), r.theory_forward[b], r.theory_backward[b],
              r.theory_backward[0], r.measured_backward[b], r.std_error[b]);
    }
  }
  auto os = open_out(m.file("gmfe.csv"));
  CsvWriter csv(os, {"region", "gmfe"});
  for (int k = 0; k < 3; ++k) csv.row(region_name(k), r.region_gmfe[k]);
}

struct SweepPoint {
  ModelHyper hyper;
  int blocks;
};

void run_sweep(const ExperimentConfig& cfg, Manifest& m) {
  std::vector<SweepPoint> points;
  const auto bl = cfg.sweep.blocks.empty() ? std::vector<int>{cfg.blocks} : cfg.sweep.blocks;
  for (const auto& h : grid_hypers(cfg)) {
    for (int b : bl) points.push_back({h, b});
  }
  const Mode inner = cfg.sweep.inner;
  std::vector<std::string> header{"sigma_21", "sigma_ov", "alpha", "blocks", "regime",
                                  "zeta",     "lambda_inv", "c_star", "mu"};
  if (inner == Mode::Theory) {
    for (const char* c : {"q_last", "p_last", "cosine_last", "j_total"}) header.push_back(c);
  } else if (inner == Mode::Compare) {
    for (const char* c : {"gmfe_early", "gmfe_middle", "gmfe_deep"}) header.push_back(c);
  } else if (inner == Mode::Simulate) {
    for (const char* c : {"j_total_measured", "std_error"}) header.push_back(c);
  }

  std::vector<std::vector<std::string>> rows(points.size());
  // Simulator points parallelise internally over seeds; theory points over the grid.
  const bool heavy = inner == Mode::Compare || inner == Mode::Simulate;
  parallel_for(static_cast<int>(points.size()), heavy ? 1 : cfg.threads, [&](int i) {
    const SweepPoint& pt = points[i];
    const PhaseRow ph = phase_point(pt.hyper);
    auto& row = rows[i];
    for (double v : {pt.hyper.sigma_21, pt.hyper.sigma_ov, ph.alpha}) row.push_back(format_double(v));
    row.push_back(std::to_string(pt.blocks));
    row.push_back(ph.regime);
    for (double v : {ph.zeta, ph.lambda_inv, ph.c_star, ph.mu}) row.push_back(format_double(v));

    ExperimentConfig sub = cfg;
    sub.mode = inner;
    sub.hyper = pt.hyper;
    sub.blocks = pt.blocks;
    if (inner == Mode::Compare || inner == Mode::Simulate) {
      // Map (sigma_21, sigma_ov) onto the simulator keeping sigma_o and sigma_1 fixed.
      if (sub.sim.sigma_o > 0.0) sub.sim.sigma_v = pt.hyper.sigma_ov / sub.sim.sigma_o;
      if (sub.sim.sigma_1 > 0.0) sub.sim.sigma_2 = pt.hyper.sigma_21 / sub.sim.sigma_1;
      sub.explicit_keys.clear();
    }
    if (inner == Mode::Theory) {
      const CovTrajectory traj = run_trajectory(sub.initial, sub.hyper, sub.blocks);
      const ApjnCurve fwd = forward_simplified(traj, sub.hyper);
      for (double v : {traj.final.q, traj.final.p, traj.final.cosine(), fwd.value(fwd.num_layers())}) {
        row.push_back(format_double(v));
      }
    } else if (inner == Mode::Compare) {
      const CompareResult r = compare_backward(sub);
      for (double g : r.region_gmfe) row.push_back(format_double(g));
    } else if (inner == Mode::Simulate) {
      const TransformerConfig sim = sub.sim_config();
      EstimatorOptions opt = sub.estimator;
      opt.threads = cfg.threads;
      const ApjnEstimate e = hutchinson_apjn(sim, make_token_source(sub), 0, sim.output_state(), opt);
      row.push_back(format_double(e.value));
      row.push_back(format_double(e.std_error));
    }
  });
  auto os = open_out(m.file("sweep.csv"));
  CsvWriter csv(os, header);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      os << row[i];
    }
    os << '\n';
  }
}

}  // namespace

Manifest::Manifest(fs::path dir, const std::string& label, const ExperimentConfig& config)
    : dir_(std::move(dir)), label_(label), config_(config.to_map()) {
  fs::create_directories(dir_);
  write("running", "");
}

fs::path Manifest::file(const std::string& name) {
  files_.push_back(dir_ / name);
  return files_.back();
}

void Manifest::complete(const std::string& summary) {
  for (const auto& f : files_) {
    if (!fs::exists(f) || fs::file_size(f) == 0) {
      write("failed", "missing or empty output " + f.string());
      throw Error("output file missing or empty: " + f.string());
    }
  }
  write("complete", summary);
}

void Manifest::fail(const std::string& error) { write("failed", error); }

void Manifest::write(const std::string& status, const std::string& detail) {
  nlohmann::json j;
  j["status"] = status;
  j["run"] = label_;
  j["config"] = config_;
  std::vector<std::string> names;
  for (const auto& f : files_) names.push_back(f.filename().string());
  j["files"] = names;
  if (!detail.empty()) j[status == "failed" ? "error" : "summary"] = detail;
  std::ofstream os(dir_ / "manifest.json");
  os << j.dump(2) << '\n';
}

RunResult guarded(const std::function<RunResult()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    return {exit_code::kConfig, {}, std::string("config error: ") + e.what()};
  } catch (const NumericalError& e) {
    return {exit_code::kNumerical, {}, std::string("numerical failure: ") + e.what()};
  } catch (const std::exception& e) {
    return {exit_code::kFailure, {}, std::string("error: ") + e.what()};
  }
}

TokenSource make_token_source(const ExperimentConfig& cfg) {
  const TransformerConfig sim = cfg.sim_config();
  if (cfg.tokens_file) {
    std::ifstream in(*cfg.tokens_file);
    if (!in) throw ConfigError("tokens", "cannot open " + cfg.tokens_file->string());
    TokenMatrix x = read_tokens_csv(in);
    if (x.rows() != sim.n || x.cols() != sim.d) {
      throw ConfigError("tokens", "token file is " + std::to_string(x.rows()) + " x " +
                                      std::to_string(x.cols()) + ", expected n x d");
    }
    return fixed_tokens(std::move(x));
  }
  const double q0 = cfg.initial.q;
  const double p0 = cfg.initial.p;
  const std::uint64_t seed = cfg.seed;
  return [=](int s) {
    return generate_permutation_symmetric(q0, p0, sim.n, sim.d,
                                          derive_seed(seed, {stream::kTokens, std::uint64_t(s)}))
        .tokens;
  };
}

CompareResult compare_backward(const ExperimentConfig& cfg) {
  cfg.validate();
  const TransformerConfig sim = cfg.sim_config();
  const ModelHyper hyper = cfg.compare_hyper();
  const TokenSource tokens = make_token_source(cfg);
  const int S = cfg.estimator.n_seeds;
  const int B = sim.blocks;

  CompareResult r;
  double q = 0.0, p = 0.0;
  for (int s = 0; s < S; ++s) {
    const CovPair st = token_statistics(tokens(s));
    q += st.q;
    p += st.p;
  }
  r.initial = CovPair::make(q / S, std::max(p / S, 0.0));

  const CovTrajectory traj = run_trajectory(r.initial, hyper, B);
  const ApjnCurve fwd = forward_simplified(traj, hyper);
  const double extra = sim.final_norm ? final_norm_factor(traj.final.q, hyper.phi) : 1.0;
  std::vector<double> back_log(2 * B + 1);
  if (hyper.finite_n()) {
    const auto bx = backward_extended(traj, hyper, {cfg.swap_coupling});
    for (int l = 0; l <= 2 * B; ++l) back_log[l] = bx[l].log_j;
  } else {
    const ApjnCurve bwd = backward_simplified(traj, hyper);
    back_log = bwd.log_values;
  }

  EstimatorOptions opt = cfg.estimator;
  opt.threads = cfg.threads;
  const auto prof = hutchinson_backward_profile(sim, tokens, sim.output_state(), opt);
  for (int b = 0; b <= B; ++b) {
    r.theory_forward.push_back(fwd.value(2 * b));
    r.theory_backward.push_back(extra * std::exp(back_log[2 * b]));
    r.measured_backward.push_back(prof[2 * b].value);
    r.std_error.push_back(prof[2 * b].std_error);
  }
  r.region_gmfe = region_gmfe(r.theory_backward, r.measured_backward);
  return r;
}

RunResult run(const ExperimentConfig& cfg) {
  return guarded([&] {
    cfg.validate();
    Manifest m(cfg.out, to_string(cfg.mode), cfg);
    try {
      std::string summary;
      switch (cfg.mode) {
        case Mode::Theory: run_theory(cfg, m); break;
        case Mode::Asymptotics: run_asymptotics(cfg, m); break;
        case Mode::Simulate: run_simulate(cfg, m); break;
        case Mode::Compare: {
          const CompareResult r = compare_backward(cfg);
          write_compare(cfg, r, m);
          summary = "gmfe early/middle/deep = " + format_double(r.region_gmfe[0]) + "/" +
                    format_double(r.region_gmfe[1]) + "/" + format_double(r.region_gmfe[2]);
          break;
        }
        case Mode::Sweep: run_sweep(cfg, m); break;
      }
      m.complete(summary);
      return RunResult{exit_code::kOk, m.files(), summary};
    } catch (const std::exception& e) {
      m.fail(e.what());
      throw;
    }
  });
}

}  // namespace sigprop
