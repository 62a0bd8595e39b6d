#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

namespace tqn {

using Rng = std::mt19937_64;

// Uniform integer in [lo, hi]. Drawn straight from the generator with modulo
// rejection instead of std::uniform_int_distribution, whose mapping is
// implementation-defined; this keeps artifacts byte-identical across standard
// libraries. lo == hi consumes no entropy.
inline int uniform_int(Rng& rng, int lo, int hi) {
  if (lo > hi) throw std::invalid_argument("uniform_int: lo > hi");
  if (lo == hi) return lo;
  const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
  // 2^64 mod span; draws at or above 2^64 - rem fall in the incomplete bucket.
  const std::uint64_t rem = (UINT64_MAX % span + 1) % span;
  std::uint64_t x = rng();
  while (rem != 0 && x > UINT64_MAX - rem) x = rng();
  return lo + static_cast<int>(x % span);
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_real(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform double in [lo, hi).
inline double uniform_real(Rng& rng, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("uniform_real: lo > hi");
  return lo + (hi - lo) * uniform_real(rng);
}

}  // namespace tqn
