// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "didgen/rng.hpp"
#include "didgen/types.hpp"

namespace didgen {

/// Fixed, ordered element palette. NoAtom marks an empty slot and is always
/// the last one-hot column.
enum class Element : uint8_t { H = 0, C, N, O, F, NoAtom };

inline constexpr int kPaletteSize = 6;  // incl. NoAtom
inline constexpr int kRealElements = 5;
inline constexpr int kMaxValence = 4;

struct ElementInfo {
  const char* symbol;
  int valence;            // bonds formed (b_j)
  int valence_electrons;  // appended feature column
};

inline constexpr std::array<ElementInfo, kPaletteSize> kElements{{
    {"H", 1, 1},
    {"C", 4, 4},
    {"N", 3, 5},
    {"O", 2, 6},
    {"F", 1, 7},
    {"NoAtom", 0, 0},
}};

inline const ElementInfo& info(Element e) {
  return kElements[static_cast<int>(e)];
}
inline int valence_of(Element e) { return info(e).valence; }
const char* symbol_of(Element e);
std::optional<Element> element_from_symbol(const std::string& s);

/// A discrete molecular graph over a fixed number of slots. Adjacency holds
/// integer bond orders; NoAtom slots have all-zero rows and columns.
class MolecularGraph {
 public:
  explicit MolecularGraph(int n_slots)
      : elements_(n_slots, Element::NoAtom),
        adjacency_(IntMatrix::Zero(n_slots, n_slots)) {}

  MolecularGraph(std::vector<Element> elements, IntMatrix adjacency);

  int n_slots() const { return static_cast<int>(elements_.size()); }
  Element element(int i) const { return elements_[i]; }
  const std::vector<Element>& elements() const { return elements_; }
  const IntMatrix& adjacency() const { return adjacency_; }
  int bond(int i, int j) const { return adjacency_(i, j); }

  void set_element(int i, Element e) { elements_[i] = e; }
  void set_bond(int i, int j, int order);

  bool is_real(int i) const { return elements_[i] != Element::NoAtom; }
  int n_real_atoms() const;
  int degree(int i) const;       // number of bonded neighbors
  int bond_sum(int i) const;     // row sum = valence actually formed

  bool operator==(const MolecularGraph& o) const = default;

 private:
  std::vector<Element> elements_;
  IntMatrix adjacency_;
};

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> violations;
  std::vector<std::string> warnings;
};

/// Checks every structural invariant: symmetry, zero diagonal, bond orders in
/// {0..3}, NoAtom rows empty, and per-atom valence equal to the element's
/// bond count. Violations are reported, never thrown.
ValidationReport validate(const MolecularGraph& mol);

/// Connected components over real atoms (bond order >= 1 edges), each a set
/// of slot indices sorted ascending. NoAtom slots are excluded.
std::vector<std::vector<int>> connected_components(const MolecularGraph& mol);

/// Keeps only the largest component (ties: the one with the lowest smallest
/// slot index); every other slot becomes NoAtom with a zeroed row/column.
/// Throws std::invalid_argument on an empty molecule.
MolecularGraph largest_component(const MolecularGraph& mol);

/// Per-element fraction over real atoms, indexed by palette position
/// (NoAtom entry always 0). Throws on an empty molecule.
Vector composition(const MolecularGraph& mol);

/// True for atoms that lie on at least one cycle. Bond orders collapse to
/// simple edges first; an atom is cyclic iff it has an incident non-bridge
/// edge.
std::vector<bool> ring_membership(const MolecularGraph& mol);

/// Controls for the random molecule sampler.
struct SamplerConfig {
  int n_atoms_max = 16;
  int max_heavy = 7;
  // heavy-atom draw weights over {C, N, O, F}
  std::array<double, 4> heavy_weights{0.60, 0.16, 0.16, 0.08};
  double extra_edge_prob = 0.55;  // chance to attempt each ring/multi-bond
  int extra_edge_tries = 5;
};

/// Builds a random valid connected molecule: sample heavy atoms, grow a
/// spanning tree under valence budgets, sprinkle ring closures and bond-order
/// increments, then fill every open valence with explicit hydrogens.
/// Deterministic per seed; retries internally until the result validates.
/// Throws std::invalid_argument when no valid molecule fits the budget.
MolecularGraph random_molecule(Rng& rng, int n_slots,
                               const SamplerConfig& cfg = {});

/// HCN in 3+ slots; handy fixture used across tests and docs.
MolecularGraph make_hcn(int n_slots = 3);

}  // namespace didgen
