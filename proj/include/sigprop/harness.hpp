#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "sigprop/apjn_measurement.hpp"
#include "sigprop/experiment_config.hpp"

namespace sigprop {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kConfig = 2;
inline constexpr int kNumerical = 3;
inline constexpr int kAcceptance = 4;
}  // namespace exit_code

/// Records run status in <out>/manifest.json: "running" at start, then "complete" with
/// the file list, or "failed" with the error.
class Manifest {
 public:
  Manifest(std::filesystem::path dir, const std::string& label, const ExperimentConfig& config);
  std::filesystem::path file(const std::string& name);  // registers and returns <dir>/name
  void complete(const std::string& summary = "");
  void fail(const std::string& error);
  const std::vector<std::filesystem::path>& files() const { return files_; }

 private:
  void write(const std::string& status, const std::string& detail);

  std::filesystem::path dir_;
  std::string label_;
  std::map<std::string, std::string> config_;
  std::vector<std::filesystem::path> files_;
};

struct RunResult {
  int exit_code = exit_code::kOk;
  std::vector<std::filesystem::path> files;
  std::string message;
};

/// Executes config.mode and writes CSV artifacts plus a manifest under config.out.
RunResult run(const ExperimentConfig& config);

/// Writes the data behind one figure: fig1a, fig2, fig4a, fig4b or fig6.
RunResult emit_figure_data(const std::string& which, const ExperimentConfig& config);
const std::vector<std::string>& figure_tags();

/// Runs `body` and maps library exceptions onto exit codes.
RunResult guarded(const std::function<RunResult()>& body);

/// Per-seed inputs: the tokens file when configured, else permutation-symmetric tokens.
TokenSource make_token_source(const ExperimentConfig& config);

struct CompareResult {
  CovPair initial;                      // measured (q0, p0) averaged over seeds
  std::vector<double> theory_forward;   // J^{2b,0}, b = 0..B
  std::vector<double> theory_backward;  // J^{out,2b}
  std::vector<double> measured_backward;
  std::vector<double> std_error;
  std::array<double, 3> region_gmfe{};
};

/// Theory-vs-measurement backward APJN per block for the configured simulator.
CompareResult compare_backward(const ExperimentConfig& config);

}  // namespace sigprop
