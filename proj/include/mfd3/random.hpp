#pragma once

#include <cstdint>
#include <random>

namespace mfd3 {

/// Random stream used everywhere in the library. Each worker or batch chunk
/// owns one; streams are never shared between threads.
using Rng = std::mt19937_64;

/// Stream `index` of a run seeded with `base_seed`. The derivation
/// (base_seed + index) is recorded in output headers.
inline Rng make_stream(std::uint64_t base_seed, std::uint64_t index) {
  return Rng(base_seed + index);
}

/// Uniform draw in [0, 1).
inline double uniform01(Rng& rng) { return std::generate_canonical<double, 53>(rng); }

}  // namespace mfd3
