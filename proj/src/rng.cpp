#include "sigprop/rng.hpp"

namespace sigprop {

std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t h = SplitMix64::mix(root ^ 0x6a09e667f3bcc909ULL);
  for (std::uint64_t tag : path) {
    h = SplitMix64::mix(h + 0x9e3779b97f4a7c15ULL + SplitMix64::mix(tag));
  }
  return h;
}

}  // namespace sigprop
