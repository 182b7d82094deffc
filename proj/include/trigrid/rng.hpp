// Copyright 2026 The trigrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace trigrid {

/// Counter-based random numbers: every draw is a pure function of its key, so
/// results do not depend on evaluation order or on how work is split across
/// threads.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t seed) : seed_(mix(seed ^ 0x9e3779b97f4a7c15ULL)) {}

  constexpr std::uint64_t bits(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    std::uint64_t h = mix(seed_ + 0x632be59bd9b4e019ULL * (a + 1));
    h = mix(h ^ (0x85ebca6b2b2ae35dULL * (b + 1)));
    h = mix(h ^ (0xc2b2ae3d27d4eb4fULL * (c + 1)));
    return h;
  }

  /// Uniform double in [0, 1).
  constexpr double uniform(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    return static_cast<double>(bits(a, b, c) >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  constexpr double uniform(double lo, double hi, std::uint64_t a, std::uint64_t b = 0,
                           std::uint64_t c = 0) const {
    return lo + (hi - lo) * uniform(a, b, c);
  }

  /// Uniform integer in [0, n).
  constexpr std::uint64_t below(std::uint64_t n, std::uint64_t a, std::uint64_t b = 0,
                                std::uint64_t c = 0) const {
    return static_cast<std::uint64_t>(uniform(a, b, c) * static_cast<double>(n)) % n;
  }

  constexpr std::uint64_t seed() const { return seed_; }

 private:
  // splitmix64 finalizer
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
};

}  // namespace trigrid
