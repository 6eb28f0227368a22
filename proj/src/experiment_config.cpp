#include "sigprop/experiment_config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sigprop/csv.hpp"
#include "sigprop/errors.hpp"

namespace sigprop {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const unsigned long long x = std::stoull(v, &used);
    if (used != v.size() || v.front() == '-') throw std::invalid_argument("bad");
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected an unsigned integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key, "expected a boolean, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& s : split_list(v)) out.push_back(to_double(key, s));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_floating_point_v<T>) {
      s += format_double(xs[i]);
    } else {
      s += std::to_string(xs[i]);
    }
  }
  return s;
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::Theory: return "theory";
    case Mode::Asymptotics: return "asymptotics";
    case Mode::Simulate: return "simulate";
    case Mode::Compare: return "compare";
    case Mode::Sweep: return "sweep";
  }
  return "?";
}

Mode parse_mode(const std::string& name) {
  for (Mode m : {Mode::Theory, Mode::Asymptotics, Mode::Simulate, Mode::Compare, Mode::Sweep}) {
    if (name == to_string(m)) return m;
  }
  throw ConfigError("mode", "unknown mode '" + name + "'");
}

std::vector<std::string> ExperimentConfig::known_keys() {
  return {"mode",     "norm",       "alpha",     "sigma_ov",       "sigma_21",     "context_n",
          "q0",       "p0",         "blocks",    "d",              "n",            "heads",
          "sigma_o",  "sigma_v",    "sigma_q",   "sigma_k",        "sigma_1",      "sigma_2",
          "final_norm", "attention", "mean_subtracting_ln", "n_probes", "n_seeds",   "probe",
          "sweep_sigma_21", "sweep_sigma_ov", "sweep_alpha", "sweep_blocks", "sweep_mode",
          "alphas",   "tokens",     "swap_coupling", "out",        "seed",         "threads"};
}

void ExperimentConfig::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string v = trim(raw_value);
  try {
    if (key == "mode") {
      mode = parse_mode(v);
    } else if (key == "norm") {
      hyper.phi.kind = parse_norm_kind(v);
    } else if (key == "alpha") {
      hyper.phi.alpha = to_double(key, v);
    } else if (key == "sigma_ov") {
      hyper.sigma_ov = to_double(key, v);
    } else if (key == "sigma_21") {
      hyper.sigma_21 = to_double(key, v);
    } else if (key == "context_n") {
      if (v == "inf" || v == "infinity" || v.empty()) {
        hyper.context_n.reset();
      } else {
        hyper.context_n = static_cast<int>(to_int(key, v));
      }
    } else if (key == "q0") {
      initial.q = to_double(key, v);
    } else if (key == "p0") {
      initial.p = to_double(key, v);
    } else if (key == "blocks") {
      blocks = static_cast<int>(to_int(key, v));
    } else if (key == "d") {
      sim.d = static_cast<int>(to_int(key, v));
    } else if (key == "n") {
      sim.n = static_cast<int>(to_int(key, v));
    } else if (key == "heads") {
      sim.heads = static_cast<int>(to_int(key, v));
    } else if (key == "sigma_o") {
      sim.sigma_o = to_double(key, v);
    } else if (key == "sigma_v") {
      sim.sigma_v = to_double(key, v);
    } else if (key == "sigma_q") {
      sim.sigma_q = to_double(key, v);
    } else if (key == "sigma_k") {
      sim.sigma_k = to_double(key, v);
    } else if (key == "sigma_1") {
      sim.sigma_1 = to_double(key, v);
    } else if (key == "sigma_2") {
      sim.sigma_2 = to_double(key, v);
    } else if (key == "final_norm") {
      sim.final_norm = to_bool(key, v);
    } else if (key == "attention") {
      sim.attention = parse_attention_mode(v);
    } else if (key == "mean_subtracting_ln") {
      sim.mean_subtracting_ln = to_bool(key, v);
    } else if (key == "n_probes") {
      estimator.n_probes = static_cast<int>(to_int(key, v));
    } else if (key == "n_seeds") {
      estimator.n_seeds = static_cast<int>(to_int(key, v));
    } else if (key == "probe") {
      if (v == "gaussian") {
        estimator.probe = ProbeKind::Gaussian;
      } else if (v == "rademacher") {
        estimator.probe = ProbeKind::Rademacher;
      } else {
        throw ConfigError(key, "expected gaussian or rademacher");
      }
    } else if (key == "sweep_sigma_21") {
      sweep.sigma_21 = to_doubles(key, v);
    } else if (key == "sweep_sigma_ov") {
      sweep.sigma_ov = to_doubles(key, v);
    } else if (key == "sweep_alpha") {
      sweep.alpha = to_doubles(key, v);
    } else if (key == "sweep_blocks") {
      sweep.blocks.clear();
      for (const auto& s : split_list(v)) sweep.blocks.push_back(static_cast<int>(to_int(key, s)));
    } else if (key == "sweep_mode") {
      sweep.inner = parse_mode(v);
    } else if (key == "alphas") {
      alphas = to_doubles(key, v);
    } else if (key == "tokens") {
      if (v.empty()) {
        tokens_file.reset();
      } else {
        tokens_file = v;
      }
    } else if (key == "swap_coupling") {
      swap_coupling = to_bool(key, v);
    } else if (key == "out") {
      out = v;
    } else if (key == "seed") {
      seed = to_u64(key, v);
    } else if (key == "threads") {
      threads = static_cast<int>(to_int(key, v));
    } else {
      throw ConfigError(key, "unknown key");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(key, e.what());
  }
  explicit_keys.insert(key);
}

void ExperimentConfig::validate() const {
  auto wrap = [](const std::string& field, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(field, e.what());
    }
  };
  if (blocks < 1) throw ConfigError("blocks", "must be >= 1");
  if (threads < 1) throw ConfigError("threads", "must be >= 1");
  if (!(initial.q > 0.0)) throw ConfigError("q0", "must be positive");
  if (initial.p < 0.0 || initial.p > initial.q) throw ConfigError("p0", "need 0 <= p0 <= q0");
  wrap("sigma_ov", [&] { hyper.validate(); });
  if (estimator.n_probes < 1) throw ConfigError("n_probes", "must be >= 1");
  if (estimator.n_seeds < 1) throw ConfigError("n_seeds", "must be >= 1");
  const bool needs_sim = mode == Mode::Simulate || mode == Mode::Compare ||
                         (mode == Mode::Sweep && (sweep.inner == Mode::Simulate || sweep.inner == Mode::Compare));
  if (needs_sim) {
    wrap("d", [&] { sim_config().validate(); });
  }
  if (mode == Mode::Compare || (mode == Mode::Sweep && sweep.inner == Mode::Compare)) {
    // Theory scales must be the products of the simulator scales when both are given.
    const ModelHyper h = compare_hyper();
    if (explicit_keys.count("sigma_ov") && !close(hyper.sigma_ov, h.sigma_ov)) {
      throw ConfigError("sigma_ov", "inconsistent with sigma_o * sigma_v = " + format_double(h.sigma_ov));
    }
    if (explicit_keys.count("sigma_21") && !close(hyper.sigma_21, h.sigma_21)) {
      throw ConfigError("sigma_21", "inconsistent with sigma_2 * sigma_1 = " + format_double(h.sigma_21));
    }
  }
  if (mode == Mode::Sweep) {
    if (sweep.inner == Mode::Sweep) throw ConfigError("sweep_mode", "sweeps cannot nest");
    for (int b : sweep.blocks) {
      if (b < 1) throw ConfigError("sweep_blocks", "entries must be >= 1");
    }
    for (double a : sweep.alpha) {
      if (!(a > 0.0)) throw ConfigError("sweep_alpha", "entries must be positive");
    }
    for (double s : sweep.sigma_21) {
      if (!(s >= 0.0)) throw ConfigError("sweep_sigma_21", "entries must be >= 0");
    }
    for (double s : sweep.sigma_ov) {
      if (!(s >= 0.0)) throw ConfigError("sweep_sigma_ov", "entries must be >= 0");
    }
  }
  for (double a : alphas) {
    if (!(a > 0.0)) throw ConfigError("alphas", "entries must be positive");
  }
}

TransformerConfig ExperimentConfig::sim_config() const {
  TransformerConfig c = sim;
  c.blocks = blocks;
  c.norm = hyper.phi;
  c.seed = seed;
  return c;
}

ModelHyper ExperimentConfig::compare_hyper() const {
  ModelHyper h = sim_config().hyper();
  h.context_n = hyper.context_n;
  return h;
}

std::map<std::string, std::string> ExperimentConfig::to_map() const {
  std::map<std::string, std::string> m;
  m["mode"] = to_string(mode);
  m["norm"] = sigprop::to_string(hyper.phi.kind);
  m["alpha"] = format_double(hyper.phi.alpha);
  m["sigma_ov"] = format_double(hyper.sigma_ov);
  m["sigma_21"] = format_double(hyper.sigma_21);
  m["context_n"] = hyper.context_n ? std::to_string(*hyper.context_n) : "inf";
  m["q0"] = format_double(initial.q);
  m["p0"] = format_double(initial.p);
  m["blocks"] = std::to_string(blocks);
  m["d"] = std::to_string(sim.d);
  m["n"] = std::to_string(sim.n);
  m["heads"] = std::to_string(sim.heads);
  m["sigma_o"] = format_double(sim.sigma_o);
  m["sigma_v"] = format_double(sim.sigma_v);
  m["sigma_q"] = format_double(sim.sigma_q);
  m["sigma_k"] = format_double(sim.sigma_k);
  m["sigma_1"] = format_double(sim.sigma_1);
  m["sigma_2"] = format_double(sim.sigma_2);
  m["final_norm"] = sim.final_norm ? "true" : "false";
  m["attention"] = sigprop::to_string(sim.attention);
  m["mean_subtracting_ln"] = sim.mean_subtracting_ln ? "true" : "false";
  m["n_probes"] = std::to_string(estimator.n_probes);
  m["n_seeds"] = std::to_string(estimator.n_seeds);
  m["probe"] = estimator.probe == ProbeKind::Gaussian ? "gaussian" : "rademacher";
  m["sweep_sigma_21"] = join(sweep.sigma_21);
  m["sweep_sigma_ov"] = join(sweep.sigma_ov);
  m["sweep_alpha"] = join(sweep.alpha);
  m["sweep_blocks"] = join(sweep.blocks);
  m["sweep_mode"] = to_string(sweep.inner);
  m["alphas"] = join(alphas);
  m["tokens"] = tokens_file ? tokens_file->string() : "";
  m["swap_coupling"] = swap_coupling ? "true" : "false";
  m["out"] = out.string();
  m["seed"] = std::to_string(seed);
  m["threads"] = std::to_string(threads);
  return m;
}

void apply_config_text(ExperimentConfig& config, const std::string& text, const std::string& origin) {
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no), "expected key = value");
    }
    config.set(line.substr(0, eq), line.substr(eq + 1));
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  ExperimentConfig config;
  apply_config_text(config, buf.str(), path.string());
  return config;
}

void apply_override(ExperimentConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError(assignment, "override must be key=value");
  config.set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

}  // namespace sigprop
