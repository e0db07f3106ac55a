// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "didgen/molgraph.hpp"

namespace didgen {

/// 64-bit FNV-1a over explicit little-endian words; the entire fingerprint
/// path sticks to integer arithmetic so bit patterns match across platforms.
class Fnv1a {
 public:
  Fnv1a& add_u64(uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      state_ ^= (v >> (8 * b)) & 0xffULL;
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Fnv1a& add_i32(int32_t v) {
    return add_u64(static_cast<uint64_t>(static_cast<uint32_t>(v)));
  }
  uint64_t digest() const { return state_; }

 private:
  uint64_t state_ = 0xcbf29ce484222325ULL;
};

/// Fixed-length bitset produced by the circular fingerprint.
class Fingerprint {
 public:
  Fingerprint(int n_bits, int radius);

  int n_bits() const { return n_bits_; }
  int radius() const { return radius_; }
  void set(uint64_t digest) { set_bit(static_cast<int>(digest % n_bits_)); }
  void set_bit(int i) { words_[i >> 6] |= 1ULL << (i & 63); }
  bool test(int i) const { return (words_[i >> 6] >> (i & 63)) & 1ULL; }
  int count() const;
  const std::vector<uint64_t>& words() const { return words_; }

  bool operator==(const Fingerprint& o) const = default;

 private:
  int n_bits_;
  int radius_;
  std::vector<uint64_t> words_;
};

/// Circular (Morgan-style) fingerprint. Round 0 hashes each real atom's
/// (element, degree, bond-order sum, ring flag); each later round hashes the
/// atom's previous digest together with the sorted (bond order, neighbor
/// digest) pairs, so the result is invariant under slot permutation. Every
/// digest from every round sets bit (digest mod n_bits).
/// Throws std::invalid_argument unless n_bits is a power of two.
Fingerprint morgan_fingerprint(const MolecularGraph& mol, int radius = 2,
                               int n_bits = 2048);

/// 1 - |a AND b| / |a OR b|; 0 when both bitsets are empty.
/// Throws std::invalid_argument on mismatched widths.
double tanimoto_distance(const Fingerprint& a, const Fingerprint& b);

/// Mean pairwise Tanimoto distance; requires at least two molecules.
double diversity(const std::vector<Fingerprint>& fps);
double diversity(const std::vector<MolecularGraph>& mols, int radius = 2,
                 int n_bits = 2048);

/// Order-independent structural key used for uniqueness counting: element
/// counts plus the sorted multiset of converged per-atom digests. Isomorphic
/// graphs always collide; distinct graphs virtually never do.
uint64_t structure_key(const MolecularGraph& mol);

}  // namespace didgen
