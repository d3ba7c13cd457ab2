#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lamp {

// Deterministic random stream. All draws are derived from raw 64-bit
// mt19937_64 output so results do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed), seed_base_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  double normal();

  // Child stream with an independent, reproducible seed.
  Rng fork(std::string_view name) const;

  std::uint64_t seed() const { return seed_base_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_base_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Named sub-stream of a root seed ("drop", "gumbel", "init", "split",
// "kmeans", ...). Same (root, name) always yields the same stream.
Rng stream(std::uint64_t root, std::string_view name);

std::uint64_t mix_seed(std::uint64_t root, std::string_view name);

}  // namespace lamp
