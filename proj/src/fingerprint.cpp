// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#include "didgen/fingerprint.hpp"

#include <algorithm>
#include <bit>

namespace didgen {

Fingerprint::Fingerprint(int n_bits, int radius)
    : n_bits_(n_bits), radius_(radius), words_((n_bits + 63) / 64, 0) {
  require(n_bits > 0 && (n_bits & (n_bits - 1)) == 0,
          "fingerprint length must be a power of two");
}

int Fingerprint::count() const {
  int c = 0;
  for (uint64_t w : words_) c += std::popcount(w);
  return c;
}

namespace {

std::vector<uint64_t> atom_digests(const MolecularGraph& mol, int rounds,
                                   const std::vector<bool>& ring) {
  const int n = mol.n_slots();
  std::vector<uint64_t> digest(n, 0);
  for (int i = 0; i < n; ++i) {
    if (!mol.is_real(i)) continue;
    Fnv1a h;
    h.add_i32(static_cast<int>(mol.element(i)))
        .add_i32(mol.degree(i))
        .add_i32(mol.bond_sum(i))
        .add_i32(ring[i] ? 1 : 0);
    digest[i] = h.digest();
  }
  for (int r = 0; r < rounds; ++r) {
    std::vector<uint64_t> next = digest;
    for (int i = 0; i < n; ++i) {
      if (!mol.is_real(i)) continue;
      std::vector<std::pair<int, uint64_t>> env;
      for (int j = 0; j < n; ++j) {
        if (mol.bond(i, j) > 0) env.emplace_back(mol.bond(i, j), digest[j]);
      }
      std::sort(env.begin(), env.end());
      Fnv1a h;
      h.add_u64(digest[i]);
      for (const auto& [order, d] : env) h.add_i32(order).add_u64(d);
      next[i] = h.digest();
    }
    digest = std::move(next);
  }
  return digest;
}

}  // namespace

Fingerprint morgan_fingerprint(const MolecularGraph& mol, int radius,
                               int n_bits) {
  Fingerprint fp(n_bits, radius);
  const auto ring = ring_membership(mol);
  const int n = mol.n_slots();

  std::vector<uint64_t> digest = atom_digests(mol, 0, ring);
  for (int i = 0; i < n; ++i)
    if (mol.is_real(i)) fp.set(digest[i]);

  for (int r = 1; r <= radius; ++r) {
    digest = atom_digests(mol, r, ring);
    for (int i = 0; i < n; ++i)
      if (mol.is_real(i)) fp.set(digest[i]);
  }
  return fp;
}

double tanimoto_distance(const Fingerprint& a, const Fingerprint& b) {
  require(a.n_bits() == b.n_bits(), "fingerprint lengths differ");
  int inter = 0, uni = 0;
  for (size_t w = 0; w < a.words().size(); ++w) {
    inter += std::popcount(a.words()[w] & b.words()[w]);
    uni += std::popcount(a.words()[w] | b.words()[w]);
  }
  if (uni == 0) return 0.0;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

double diversity(const std::vector<Fingerprint>& fps) {
  require(fps.size() >= 2, "diversity needs at least 2 molecules");
  double total = 0;
  int pairs = 0;
  for (size_t i = 0; i < fps.size(); ++i) {
    for (size_t j = i + 1; j < fps.size(); ++j) {
      total += tanimoto_distance(fps[i], fps[j]);
      ++pairs;
    }
  }
  return total / pairs;
}

double diversity(const std::vector<MolecularGraph>& mols, int radius,
                 int n_bits) {
  std::vector<Fingerprint> fps;
  fps.reserve(mols.size());
  for (const auto& m : mols) fps.push_back(morgan_fingerprint(m, radius, n_bits));
  return diversity(fps);
}

uint64_t structure_key(const MolecularGraph& mol) {
  const auto ring = ring_membership(mol);
  // n rounds of refinement reach a stable partition for any n-atom graph
  auto digest = atom_digests(mol, mol.n_real_atoms(), ring);
  std::vector<uint64_t> real;
  for (int i = 0; i < mol.n_slots(); ++i)
    if (mol.is_real(i)) real.push_back(digest[i]);
  std::sort(real.begin(), real.end());
  Fnv1a h;
  h.add_i32(static_cast<int>(real.size()));
  for (uint64_t d : real) h.add_u64(d);
  return h.digest();
}

}  // namespace didgen
