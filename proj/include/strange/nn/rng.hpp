#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace strange::nn {

/// Seeded pseudo-random source. The engine is the standard 64-bit Mersenne
/// twister; the mapping from raw bits to reals and integers is done here so
/// sequences do not depend on the standard library's distribution classes.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  /// Independent child stream derived from this generator's seed and a tag.
  Rng fork(std::uint64_t tag) const;

  std::string serialize() const;
  static Rng deserialize(const std::string& text);

  friend bool operator==(const Rng& a, const Rng& b) { return a.seed_ == b.seed_ && a.engine_ == b.engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace strange::nn
