// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace didgen {

/// Deterministic random source. The engine is std::mt19937_64 (its output
/// sequence is pinned by the standard); all distributions are implemented
/// here instead of <random> because the standard leaves distribution
/// algorithms implementation-defined and seeded runs must replay exactly.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [lo, hi], inclusive. Lemire bounded rejection.
  int uniform_int(int lo, int hi) {
    uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
    while (true) {
      uint64_t x = next_u64();
      unsigned __int128 m = static_cast<unsigned __int128>(x) * range;
      uint64_t l = static_cast<uint64_t>(m);
      if (l >= range) return lo + static_cast<int>(m >> 64);
      uint64_t t = (-range) % range;
      if (l >= t) return lo + static_cast<int>(m >> 64);
    }
  }

  /// Standard normal via Marsaglia's polar method (cached pair).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  /// Derives an independent child seed; used for per-run streams.
  static uint64_t derive(uint64_t seed, uint64_t index) {
    // splitmix64 over the pair
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace didgen
