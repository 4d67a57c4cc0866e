#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include "mfnet/common.hpp"

namespace mfnet {

/// 64-bit finalizer with good avalanche behaviour (splitmix64 / murmur3
/// lineage).  Everything random in this library is derived from it so that
/// draws are pure functions of (seed, counter) and never depend on call
/// order or the standard library's distribution internals.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t h, uint64_t v) {
  return mix64(h ^ (v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2)));
}

/// Inverse of the standard normal CDF.  Acklam's rational approximation
/// polished with one Halley step through erfc, giving ~1e-15 relative
/// accuracy over (0,1).
double inverse_normal_cdf(double p);

/// Counter-based generator: a keyed hash evaluated at explicit counters.
/// Stateless by design; `child` derives an independent stream.
struct CounterRng {
  uint64_t key0 = 0;
  uint64_t key1 = 0;

  static CounterRng from_seed(uint64_t seed) {
    CounterRng r;
    r.key0 = mix64(seed ^ 0x243f6a8885a308d3ull);
    r.key1 = mix64(r.key0 ^ 0x13198a2e03707344ull);
    return r;
  }

  CounterRng child(uint64_t tag) const {
    CounterRng r;
    r.key0 = hash_combine(key0, tag);
    r.key1 = hash_combine(key1, ~tag);
    return r;
  }

  uint64_t bits(uint64_t ctr) const {
    return mix64(mix64(key0 ^ ctr) + key1);
  }

  /// Uniform on (0,1), never exactly 0 or 1.
  double u01(uint64_t ctr) const {
    return (static_cast<double>(bits(ctr) >> 11) + 0.5) * 0x1p-53;
  }

  double normal(uint64_t ctr) const { return inverse_normal_cdf(u01(ctr)); }
};

/// Radical-inverse (van der Corput) value of `index` in base `base`.
/// Index 0 maps to 0; callers normally start at 1.
double radical_inverse(uint64_t index, uint32_t base);

/// n-th prime for Halton bases (n = 0 -> 2).  Supports the first 64.
uint32_t halton_base(int dim);

}  // namespace mfnet
