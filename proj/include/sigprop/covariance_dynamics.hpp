#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "sigprop/gaussian_kernels.hpp"

namespace sigprop {

struct ModelHyper {
  double sigma_ov = 0.0;
  double sigma_21 = 0.0;
  std::optional<int> context_n;  // empty: large-n limit
  Nonlinearity phi;

  bool finite_n() const noexcept { return context_n.has_value(); }
  void validate() const;
};

enum class LayerKind { Attention, Mlp };

inline LayerKind layer_kind(int layer) { return layer % 2 == 0 ? LayerKind::Attention : LayerKind::Mlp; }
const char* to_string(LayerKind kind);

/// State entering layer `layer`, and its phi-propagated covariance.
struct LayerState {
  int layer = 0;
  LayerKind kind = LayerKind::Attention;
  CovPair before;
  CovPair tilde;
};

struct CovTrajectory {
  CovPair initial;
  std::vector<LayerState> layers;  // l = 0 .. L-1
  CovPair final;                   // state after layer L-1

  int num_layers() const noexcept { return static_cast<int>(layers.size()); }
  int num_blocks() const noexcept { return num_layers() / 2; }
  /// Covariance entering layer l, for l = 0 .. L (l = L gives the output).
  const CovPair& at_layer(int l) const;
  /// Block-level (Q^b, P^b) = (q^{2b}, p^{2b}) for b = 0 .. B.
  const CovPair& block(int b) const { return at_layer(2 * b); }

  void write_csv(std::ostream& os) const;
};

CovPair step_attention(const CovPair& cov, const ModelHyper& hyper);
CovPair step_mlp(const CovPair& cov, const ModelHyper& hyper);

/// Alternates attention and MLP layers for `blocks` blocks. Rejects p0 < 0 with UnsupportedRegime.
CovTrajectory run_trajectory(const CovPair& initial, const ModelHyper& hyper, int blocks);

}  // namespace sigprop
