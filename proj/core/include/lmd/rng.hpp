#pragma once

#include <cstdint>
#include <optional>
#include <random>

namespace lmd {

/// mt19937_64 with hand-rolled uniform and Box-Muller sampling, so sampled
/// values are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n), unbiased. n must be > 0.
  std::uint64_t index(std::uint64_t n);
  /// Standard normal.
  double gaussian();

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// splitmix64 finalizer; used to derive independent child seeds.
[[nodiscard]] std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace lmd
