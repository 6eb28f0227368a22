#pragma once

#include <cmath>
#include <iosfwd>
#include <vector>

#include "sigprop/covariance_dynamics.hpp"

namespace sigprop {

enum class Direction { Forward, Backward };

/// APJN indexed by layer 0..L, stored as logarithms. Forward curves hold J^{l,0};
/// backward curves hold J^{L,l}.
struct ApjnCurve {
  Direction direction = Direction::Forward;
  int reference_layer = 0;
  std::vector<double> log_values;

  int num_layers() const noexcept { return static_cast<int>(log_values.size()) - 1; }
  double value(int l) const { return std::exp(log_values.at(l)); }
  double log_value(int l) const { return log_values.at(l); }
  /// Block-level values: entry b is the value at layer 2b, b = 0..B.
  std::vector<double> block_values() const;
};

/// Joint APJN and cross-positional correlation, kept as (log J, K/J).
struct JKState {
  double log_j = 0.0;
  double k_over_j = 0.0;

  double j() const { return std::exp(log_j); }
  double k() const { return k_over_j * std::exp(log_j); }
};

struct ExtendedOptions {
  /// Exchange q^ and p^ in the K-coupling terms of the backward recursion.
  bool swap_coupling = false;
};

/// Per-layer multiplier of the simplified recursion: 1 for attention, 1 + sigma_21^2 q^ / 2 for MLP.
double chi_factor(const LayerState& layer, const ModelHyper& hyper);

ApjnCurve forward_simplified(const CovTrajectory& traj, const ModelHyper& hyper);
ApjnCurve backward_simplified(const CovTrajectory& traj, const ModelHyper& hyper);

/// Entry l is (J^{l,0}, K^{l,0}) for l = 0..L. Requires finite context_n.
std::vector<JKState> forward_extended(const CovTrajectory& traj, const ModelHyper& hyper);
/// Entry l is (J^{L,l}, K^{L,l}) for l = 0..L. Requires finite context_n.
std::vector<JKState> backward_extended(const CovTrajectory& traj, const ModelHyper& hyper,
                                       const ExtendedOptions& options = {});

/// Extra APJN factor contributed by a final normalization layer at variance q_last.
double final_norm_factor(double q_last, const Nonlinearity& phi);

/// Block table: block, j_forward, j_backward, k_forward, k_backward, chi for b = 1..B.
/// Uses the extended recursion when context_n is finite, the simplified one (K = 0) otherwise.
void write_curves_csv(std::ostream& os, const CovTrajectory& traj, const ModelHyper& hyper);

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace sigprop
