#pragma once

#include <cstdint>
#include <optional>

namespace kbsindy {

/// SplitMix64: a Weyl counter (increment 0x9e3779b97f4a7c15) passed through a
/// fixed 64-bit finalizer. The stream for seed s is mix(s + k*gamma), k = 1, 2, ...
/// so any implementation of the same three lines reproduces it.
///
/// uniform() uses the top 53 bits: (next() >> 11) * 2^-53, in [0, 1).
/// normal() is the Box-Muller transform on u1 = 1 - uniform(), u2 = uniform();
/// the cosine branch is returned first and the sine branch is cached.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept;
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  double normal() noexcept;
  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

 private:
  std::uint64_t state_;
  std::optional<double> spare_;
};

/// Seed for an independent sub-stream (Monte-Carlo run, noise channel, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

}  // namespace kbsindy
