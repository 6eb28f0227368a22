#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace sigprop {

// SplitMix64 (Steele, Lea & Flood 2014). The state is a plain counter advanced by a
// fixed odd increment, so a stream is fully identified by its starting key. Seeds for
// sub-streams (block, matrix, probe, ...) are derived with derive_seed().
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t key = 0) noexcept : state_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Hash a root seed together with a path of integer tags into a stream key.
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) noexcept;

/// Stream tags used by the simulator and the estimators.
namespace stream {
inline constexpr std::uint64_t kWeights = 1;
inline constexpr std::uint64_t kTokens = 2;
inline constexpr std::uint64_t kProbes = 3;
inline constexpr std::uint64_t kReadout = 4;
inline constexpr std::uint64_t kEnsemble = 5;
}  // namespace stream

}  // namespace sigprop
