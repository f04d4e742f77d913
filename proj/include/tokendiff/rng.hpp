#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace tokendiff {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seeded random stream with splittable substreams.
///
/// All randomness in the project funnels through one root seed. A child
/// stream is derived as substream(i): its key is
/// splitmix64(parent_key ^ splitmix64(i + 1)), which decorrelates children
/// from each other and from the parent regardless of how much the parent
/// has been consumed. Draw mapping is fixed here (not delegated to
/// std::uniform_*_distribution) so identical seeds give identical draws on
/// every platform.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : key_(seed), engine_(splitmix64(seed)) {}

  RngStream substream(uint64_t index) const {
    return RngStream(key_ ^ splitmix64(index + 1));
  }

  uint64_t key() const { return key_; }

  uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be > 0.
  uint64_t next_below(uint64_t n) {
    // Multiply-shift; bias is < 2^-64 per draw, irrelevant at this scale.
    return static_cast<uint64_t>((static_cast<__uint128_t>(engine_()) * n) >> 64);
  }

  bool next_bernoulli(double p) { return next_double() < p; }

  /// Inverse-CDF draw from an unnormalized nonnegative weight vector.
  /// Consumes exactly one uniform; falls back to the last positive-weight
  /// index when rounding leaves the cumulative sum slightly below the draw.
  int next_categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    const double u = next_double() * total;
    double cum = 0.0;
    int last_positive = -1;
    for (int i = 0; i < static_cast<int>(weights.size()); ++i) {
      if (weights[i] <= 0.0) continue;
      cum += weights[i];
      last_positive = i;
      if (u < cum) return i;
    }
    return last_positive;
  }

 private:
  uint64_t key_;
  std::mt19937_64 engine_;
};

}  // namespace tokendiff
