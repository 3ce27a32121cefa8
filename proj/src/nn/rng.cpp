#include "strange/nn/rng.hpp"

#include <sstream>

#include "strange/errors.hpp"

namespace strange::nn {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw UsageError("Rng::below(0)");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

Rng Rng::fork(std::uint64_t tag) const {
  // splitmix64 finalizer over (seed, tag)
  std::uint64_t z = seed_ + 0x9E3779B97F4A7C15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return Rng(z ^ (z >> 31));
}

std::string Rng::serialize() const {
  std::ostringstream os;
  os << seed_ << ' ' << engine_;
  return os.str();
}

Rng Rng::deserialize(const std::string& text) {
  std::istringstream is(text);
  Rng rng;
  is >> rng.seed_ >> rng.engine_;
  if (!is) throw IoError("malformed rng state");
  return rng;
}

}  // namespace strange::nn
