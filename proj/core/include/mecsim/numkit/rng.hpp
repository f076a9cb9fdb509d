#pragma once

#include <cstdint>
#include <vector>

namespace mecsim::numkit {

/// Counter-based deterministic generator. The k-th output is the SplitMix64
/// finalizer applied to seed + k * 0x9E3779B97F4A7C15, so the integer stream
/// depends only on (seed, counter) and is reproducible across platforms.
/// Gaussians use Box-Muller and always consume exactly two uniforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() {
    std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi);

  /// One draw of N(mean, var). var >= 0; var == 0 returns mean exactly
  /// (the two uniforms are still consumed).
  double gaussian(double mean, double var);

  std::vector<double> gaussian_vec(double mean, double var, int n);

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace mecsim::numkit
