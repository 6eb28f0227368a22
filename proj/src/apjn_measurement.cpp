#include "sigprop/apjn_measurement.hpp"

#include <algorithm>
#include <atomic>
#include <boost/random/normal_distribution.hpp>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "sigprop/csv.hpp"
#include "sigprop/errors.hpp"
#include "sigprop/rng.hpp"

namespace sigprop {
namespace {

TokenMatrix draw_probe(int rows, int cols, ProbeKind kind, SplitMix64& gen) {
  TokenMatrix v(rows, cols);
  if (kind == ProbeKind::Rademacher) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = (gen() >> 63) ? 1.0 : -1.0;
  } else {
    boost::random::normal_distribution<double> normal;
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = normal(gen);
  }
  return v;
}

double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_sd(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

// Combine per-seed probe samples into an estimate.
ApjnEstimate summarize(int l_lo, int l_hi, const std::vector<std::vector<double>>& samples) {
  ApjnEstimate e;
  e.l_lo = l_lo;
  e.l_hi = l_hi;
  e.n_seeds = static_cast<int>(samples.size());
  e.n_probes = samples.empty() ? 0 : static_cast<int>(samples.front().size());
  for (const auto& s : samples) e.per_seed.push_back(mean_of(s));
  e.value = mean_of(e.per_seed);
  if (e.n_seeds >= 2) {
    e.std_error = sample_sd(e.per_seed) / std::sqrt(static_cast<double>(e.n_seeds));
  } else if (!samples.empty()) {
    e.std_error = sample_sd(samples.front()) / std::sqrt(static_cast<double>(e.n_probes));
  }
  return e;
}

void check_options(const EstimatorOptions& o) {
  if (o.n_probes < 1 || o.n_seeds < 1) throw DomainError("n_probes and n_seeds must be >= 1");
}

std::uint64_t probe_seed(const TransformerConfig& cfg, int seed_index) {
  return derive_seed(cfg.seed, {stream::kProbes, static_cast<std::uint64_t>(seed_index)});
}

}  // namespace

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

TokenSource fixed_tokens(TokenMatrix tokens) {
  return [t = std::move(tokens)](int) { return t; };
}

std::uint64_t ensemble_seed(const TransformerConfig& cfg, int seed_index) {
  return derive_seed(cfg.seed, {stream::kEnsemble, static_cast<std::uint64_t>(seed_index)});
}

std::vector<double> hutchinson_samples(const ActivationTrace& trace, const Weights& weights,
                                       const TransformerConfig& cfg, int l_lo, int l_hi,
                                       int n_probes, ProbeKind probe, std::uint64_t seed) {
  SplitMix64 gen(seed);
  const auto rows = static_cast<int>(trace.output.rows());
  const auto cols = static_cast<int>(trace.output.cols());
  const double nd = static_cast<double>(rows) * cols;
  std::vector<double> out;
  out.reserve(n_probes);
  for (int k = 0; k < n_probes; ++k) {
    const TokenMatrix v = draw_probe(rows, cols, probe, gen);
    out.push_back(vjp(trace, weights, cfg, v, l_hi, l_lo).squaredNorm() / nd);
  }
  return out;
}

ApjnEstimate hutchinson_apjn(const TransformerConfig& config, const TokenSource& tokens, int l_lo,
                             int l_hi, const EstimatorOptions& options) {
  check_options(options);
  std::vector<std::vector<double>> samples(options.n_seeds);
  parallel_for(options.n_seeds, options.threads, [&](int s) {
    TransformerConfig cfg = config;
    cfg.seed = ensemble_seed(config, s);
    const Weights w = init_weights(cfg);
    const ActivationTrace trace = forward(w, tokens(s), cfg);
    samples[s] = hutchinson_samples(trace, w, cfg, l_lo, l_hi, options.n_probes, options.probe,
                                    probe_seed(config, s));
  });
  return summarize(l_lo, l_hi, samples);
}

std::vector<ApjnEstimate> hutchinson_backward_profile(const TransformerConfig& config,
                                                      const TokenSource& tokens, int l_hi,
                                                      const EstimatorOptions& options) {
  check_options(options);
  // samples[l][s][k]
  std::vector<std::vector<std::vector<double>>> samples(
      l_hi + 1, std::vector<std::vector<double>>(options.n_seeds,
                                                 std::vector<double>(options.n_probes)));
  parallel_for(options.n_seeds, options.threads, [&](int s) {
    TransformerConfig cfg = config;
    cfg.seed = ensemble_seed(config, s);
    const Weights w = init_weights(cfg);
    const ActivationTrace trace = forward(w, tokens(s), cfg);
    const double nd = static_cast<double>(cfg.n) * cfg.d;
    SplitMix64 gen(probe_seed(config, s));
    for (int k = 0; k < options.n_probes; ++k) {
      const TokenMatrix v = draw_probe(cfg.n, cfg.d, options.probe, gen);
      backpropagate(trace, w, cfg, v, l_hi, [&](int l, const TokenMatrix& g) {
        samples[l][s][k] = g.squaredNorm() / nd;
      });
    }
  });
  std::vector<ApjnEstimate> out;
  for (int l = 0; l <= l_hi; ++l) out.push_back(summarize(l, l_hi, samples[l]));
  return out;
}

double exact_apjn(const ActivationTrace& trace, const Weights& weights,
                  const TransformerConfig& cfg, int l_lo, int l_hi) {
  const auto rows = trace.output.rows();
  const auto cols = trace.output.cols();
  TokenMatrix e = TokenMatrix::Zero(rows, cols);
  double total = 0.0;
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    e.data()[i] = 1.0;
    total += vjp(trace, weights, cfg, e, l_hi, l_lo).squaredNorm();
    e.data()[i] = 0.0;
  }
  return total / static_cast<double>(rows * cols);
}

ActivationStats token_activation_stats(const TokenMatrix& x) {
  const auto n = x.rows();
  const double d = static_cast<double>(x.cols());
  const Eigen::MatrixXd gram = x * x.transpose() / d;
  std::vector<double> self, cross;
  for (Eigen::Index s = 0; s < n; ++s) {
    self.push_back(gram(s, s));
    for (Eigen::Index t = s + 1; t < n; ++t) cross.push_back(gram(s, t));
  }
  ActivationStats st;
  st.q_bar = mean_of(self);
  st.delta_q = sample_sd(self);
  if (!cross.empty()) {
    st.p_bar = mean_of(cross);
    st.delta_p = sample_sd(cross);
  } else {
    st.p_bar = st.q_bar;
  }
  return st;
}

ActivationStats measure_covariance(const ActivationTrace& trace, int block) {
  const int L = trace.num_layers();
  if (block < 0 || 2 * block > L) throw DomainError("block out of range");
  return token_activation_stats(trace.state(2 * block));
}

double gmfe(const std::vector<double>& theory, const std::vector<double>& measured) {
  if (theory.size() != measured.size() || theory.empty()) {
    throw ShapeError("GMFE needs two non-empty curves of equal length");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < theory.size(); ++i) {
    if (!(theory[i] > 0.0) || !(measured[i] > 0.0)) {
      throw DomainError("GMFE requires strictly positive curves");
    }
    s += std::abs(std::log(theory[i] / measured[i]));
  }
  return std::exp(s / static_cast<double>(theory.size()));
}

int region_of_block(int b, int blocks) {
  if (b < 1 || b > blocks - 1) return -1;
  if (3 * b <= blocks) return 0;
  if (3 * b <= 2 * blocks) return 1;
  return 2;
}

std::array<double, 3> region_gmfe(const std::vector<double>& theory,
                                  const std::vector<double>& measured) {
  if (theory.size() != measured.size()) throw ShapeError("curves differ in length");
  const int B = static_cast<int>(theory.size()) - 1;
  std::array<std::vector<double>, 3> t, m;
  for (int b = 0; b <= B; ++b) {
    const int r = region_of_block(b, B);
    if (r < 0) continue;
    t[r].push_back(theory[b]);
    m[r].push_back(measured[b]);
  }
  std::array<double, 3> out{};
  for (int r = 0; r < 3; ++r) {
    out[r] = t[r].empty() ? std::numeric_limits<double>::quiet_NaN() : gmfe(t[r], m[r]);
  }
  return out;
}

AmplificationRatios gradient_amplification(const TransformerConfig& config,
                                           const std::vector<TokenMatrix>& batch,
                                           std::uint64_t readout_seed, int n_seeds, int threads) {
  if (batch.empty() || n_seeds < 1) throw DomainError("need a non-empty batch and n_seeds >= 1");
  const int B = config.blocks;
  const int top = config.output_state();
  SplitMix64 gen(derive_seed(readout_seed, {stream::kReadout}));
  boost::random::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(double(config.d)));
  Eigen::RowVectorXd readout(config.d);
  for (int j = 0; j < config.d; ++j) readout(j) = normal(gen);

  // per-seed accumulated squared norms at block outputs (entries 0..B) and at the output
  std::vector<std::vector<double>> acc(n_seeds, std::vector<double>(B + 2, 0.0));
  parallel_for(n_seeds, threads, [&](int s) {
    TransformerConfig cfg = config;
    cfg.seed = ensemble_seed(config, s);
    const Weights w = init_weights(cfg);
    for (const auto& x : batch) {
      const ActivationTrace trace = forward(w, x, cfg);
      const TokenMatrix& y = trace.state(top);
      const double pred = readout.dot(y.colwise().mean());
      // loss = pred^2 / 2, so dL/dy_s = pred * readout / n
      const TokenMatrix g = (pred / cfg.n) * readout.replicate(cfg.n, 1);
      backpropagate(trace, w, cfg, g, top, [&](int l, const TokenMatrix& gl) {
        if (l == top) acc[s][B + 1] += gl.squaredNorm();
        if (l % 2 == 0 && l <= cfg.num_layers()) acc[s][l / 2] += gl.squaredNorm();
      });
    }
  });
  std::vector<double> total(B + 2, 0.0);
  for (const auto& a : acc) {
    for (int i = 0; i < B + 2; ++i) total[i] += a[i];
  }
  AmplificationRatios r;
  for (int b = 0; b <= B; ++b) {
    r.to_last_block.push_back(total[b] / total[B]);
    r.to_output.push_back(total[b] / total[B + 1]);
  }
  return r;
}

void write_measurements_csv(std::ostream& os, const std::vector<ApjnEstimate>& estimates) {
  CsvWriter w(os, {"l_lo", "l_hi", "estimate", "std_error", "n_probes", "n_seeds"});
  for (const auto& e : estimates) w.row(e.l_lo, e.l_hi, e.value, e.std_error, e.n_probes, e.n_seeds);
}

}  // namespace sigprop
