#include "anthrofit/rng.h"

#include <cmath>
#include <numbers>

namespace anthrofit {

double Rng::normal() {
  if (hasCached_) {
    hasCached_ = false;
    return cached_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) {
    u1 = uniform();
  }
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  cached_ = r * std::sin(phi);
  hasCached_ = true;
  return r * std::cos(phi);
}

uint64_t Rng::below(uint64_t n) {
  // Rejection sampling keeps the result unbiased.
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x = engine_();
  while (x >= limit) {
    x = engine_();
  }
  return x % n;
}

uint64_t streamSeed(uint64_t seed, uint64_t index) {
  // splitmix64 finalizer over (seed, index)
  uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

} // namespace anthrofit
