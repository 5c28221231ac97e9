#pragma once

#include <cstdint>
#include <random>

namespace anthrofit {

/// Seeded generator with platform-independent output. The engine is
/// std::mt19937_64 (its sequence is fixed by the standard); the uniform and
/// normal transforms are implemented here because the standard library's
/// distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next() {
    return engine_();
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
  }

  /// Standard normal via Box-Muller; the second value is cached.
  double normal();

  double normal(double mean, double stddev) {
    return mean + stddev * normal();
  }

  /// Uniform integer in [0, n).
  uint64_t below(uint64_t n);

 private:
  std::mt19937_64 engine_;
  bool hasCached_ = false;
  double cached_ = 0.0;
};

/// Independent stream for item `index` of a run seeded with `seed`, so work
/// can be partitioned without changing results.
uint64_t streamSeed(uint64_t seed, uint64_t index);

} // namespace anthrofit
