#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sigprop/apjn_measurement.hpp"
#include "sigprop/covariance_dynamics.hpp"
#include "sigprop/transformer.hpp"

namespace sigprop {

enum class Mode { Theory, Asymptotics, Simulate, Compare, Sweep };
const char* to_string(Mode mode);
Mode parse_mode(const std::string& name);

struct SweepAxes {
  std::vector<double> sigma_21;
  std::vector<double> sigma_ov;
  std::vector<double> alpha;
  std::vector<int> blocks;
  Mode inner = Mode::Theory;  // what each grid point runs
};

/// Flat experiment description. Text form is `key = value` per line, `#` comments,
/// lists comma-separated; keys match the field names below.
struct ExperimentConfig {
  Mode mode = Mode::Theory;
  ModelHyper hyper{0.31, 0.61, std::nullopt, Nonlinearity::layer_norm()};
  TransformerConfig sim;
  CovPair initial{1.0, 0.2};
  int blocks = 12;
  EstimatorOptions estimator{10, 8, ProbeKind::Gaussian, 1};
  SweepAxes sweep;
  std::vector<double> alphas{0.4, 1.0, 1.9};  // figure recipes with several Derf variants
  std::optional<std::filesystem::path> tokens_file;
  bool swap_coupling = false;
  std::filesystem::path out = "sigprop-out";
  std::uint64_t seed = 0;
  int threads = 1;

  std::set<std::string> explicit_keys;  // keys set by the file or overrides

  /// Apply one `key=value` assignment. Throws ConfigError naming the key.
  void set(const std::string& key, const std::string& value);
  /// Cross-field validation; throws ConfigError naming the offending field.
  void validate() const;
  /// Simulator config with blocks, seed and nonlinearity synchronised.
  TransformerConfig sim_config() const;
  /// Theory parameters for the compare pipeline: derived from the simulator scales.
  ModelHyper compare_hyper() const;
  std::map<std::string, std::string> to_map() const;

  static std::vector<std::string> known_keys();
};

ExperimentConfig load_config(const std::filesystem::path& path);
void apply_config_text(ExperimentConfig& config, const std::string& text, const std::string& origin);
/// `key=value` override from the command line.
void apply_override(ExperimentConfig& config, const std::string& assignment);

}  // namespace sigprop
