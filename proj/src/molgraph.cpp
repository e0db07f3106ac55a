// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#include "didgen/molgraph.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <numeric>
#include <sstream>

namespace didgen {

const char* symbol_of(Element e) { return info(e).symbol; }

std::optional<Element> element_from_symbol(const std::string& s) {
  for (int i = 0; i < kPaletteSize; ++i) {
    if (s == kElements[i].symbol) return static_cast<Element>(i);
  }
  return std::nullopt;
}

MolecularGraph::MolecularGraph(std::vector<Element> elements,
                               IntMatrix adjacency)
    : elements_(std::move(elements)), adjacency_(std::move(adjacency)) {
  require(adjacency_.rows() == adjacency_.cols() &&
              adjacency_.rows() == static_cast<int>(elements_.size()),
          "adjacency shape must match element count");
}

void MolecularGraph::set_bond(int i, int j, int order) {
  require(i != j, "no self bonds");
  adjacency_(i, j) = order;
  adjacency_(j, i) = order;
}

int MolecularGraph::n_real_atoms() const {
  return static_cast<int>(
      std::count_if(elements_.begin(), elements_.end(),
                    [](Element e) { return e != Element::NoAtom; }));
}

int MolecularGraph::degree(int i) const {
  int d = 0;
  for (int j = 0; j < n_slots(); ++j)
    if (adjacency_(i, j) > 0) ++d;
  return d;
}

int MolecularGraph::bond_sum(int i) const { return adjacency_.row(i).sum(); }

ValidationReport validate(const MolecularGraph& mol) {
  ValidationReport rep;
  const int n = mol.n_slots();
  const auto& a = mol.adjacency();
  auto fail = [&rep](const std::string& msg) {
    rep.ok = false;
    rep.violations.push_back(msg);
  };

  for (int i = 0; i < n; ++i) {
    if (a(i, i) != 0) fail("nonzero diagonal at atom " + std::to_string(i));
    for (int j = i + 1; j < n; ++j) {
      if (a(i, j) != a(j, i)) {
        std::ostringstream os;
        os << "asymmetric bond (" << i << "," << j << "): " << a(i, j)
           << " vs " << a(j, i);
        fail(os.str());
      }
      if (a(i, j) < 0 || a(i, j) > 3) {
        std::ostringstream os;
        os << "bond order " << a(i, j) << " out of range at (" << i << ","
           << j << ")";
        fail(os.str());
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    const int sum = mol.bond_sum(i);
    if (!mol.is_real(i)) {
      if (sum != 0) fail("NoAtom slot " + std::to_string(i) + " has bonds");
      continue;
    }
    const int want = valence_of(mol.element(i));
    if (sum > kMaxValence) {
      std::ostringstream os;
      os << "valence " << sum << " > " << kMaxValence << " at atom " << i;
      fail(os.str());
    }
    if (sum != want) {
      std::ostringstream os;
      os << "atom " << i << " (" << symbol_of(mol.element(i)) << ") has valence "
         << sum << ", expected " << want;
      fail(os.str());
    }
  }
  if (mol.n_real_atoms() == 0) rep.warnings.push_back("no atoms");
  return rep;
}

std::vector<std::vector<int>> connected_components(const MolecularGraph& mol) {
  const int n = mol.n_slots();
  std::vector<bool> seen(n, false);
  std::vector<std::vector<int>> comps;
  for (int s = 0; s < n; ++s) {
    if (seen[s] || !mol.is_real(s)) continue;
    std::vector<int> comp;
    std::deque<int> queue{s};
    seen[s] = true;
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      comp.push_back(u);
      for (int v = 0; v < n; ++v) {
        if (!seen[v] && mol.bond(u, v) > 0 && mol.is_real(v)) {
          seen[v] = true;
          queue.push_back(v);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

MolecularGraph largest_component(const MolecularGraph& mol) {
  auto comps = connected_components(mol);
  require(!comps.empty(), "largest_component of empty molecule");
  // Components come out ordered by smallest index, so the first maximal-size
  // one realizes the tie-break.
  size_t best = 0;
  for (size_t k = 1; k < comps.size(); ++k) {
    if (comps[k].size() > comps[best].size()) best = k;
  }
  std::vector<bool> keep(mol.n_slots(), false);
  for (int i : comps[best]) keep[i] = true;

  MolecularGraph out(mol.n_slots());
  for (int i = 0; i < mol.n_slots(); ++i) {
    if (!keep[i]) continue;
    out.set_element(i, mol.element(i));
    for (int j = i + 1; j < mol.n_slots(); ++j) {
      if (keep[j] && mol.bond(i, j) > 0) out.set_bond(i, j, mol.bond(i, j));
    }
  }
  return out;
}

Vector composition(const MolecularGraph& mol) {
  const int total = mol.n_real_atoms();
  require(total > 0, "composition of empty molecule");
  Vector frac = Vector::Zero(kPaletteSize);
  for (int i = 0; i < mol.n_slots(); ++i) {
    if (mol.is_real(i)) frac[static_cast<int>(mol.element(i))] += 1.0;
  }
  return frac / static_cast<double>(total);
}

namespace {

// Bridge finding (Tarjan low-link) over the simple graph of real atoms.
struct BridgeFinder {
  const MolecularGraph& mol;
  std::vector<int> disc, low;
  std::vector<bool> on_cycle;
  int timer = 0;

  explicit BridgeFinder(const MolecularGraph& m)
      : mol(m),
        disc(m.n_slots(), -1),
        low(m.n_slots(), 0),
        on_cycle(m.n_slots(), false) {}

  void dfs(int u, int parent_edge_from) {
    disc[u] = low[u] = timer++;
    for (int v = 0; v < mol.n_slots(); ++v) {
      if (mol.bond(u, v) == 0 || !mol.is_real(v)) continue;
      if (v == parent_edge_from) {
        parent_edge_from = -1;  // skip the tree edge once; no parallel edges
        continue;
      }
      if (disc[v] != -1) {
        low[u] = std::min(low[u], disc[v]);
        if (disc[v] < disc[u]) {  // back edge: u..v path is a cycle
          on_cycle[u] = true;
          on_cycle[v] = true;
        }
      } else {
        dfs(v, u);
        low[u] = std::min(low[u], low[v]);
        if (low[v] <= disc[u]) {  // (u,v) not a bridge
          on_cycle[u] = true;
          on_cycle[v] = true;
        }
      }
    }
  }
};

}  // namespace

std::vector<bool> ring_membership(const MolecularGraph& mol) {
  BridgeFinder bf(mol);
  for (int i = 0; i < mol.n_slots(); ++i) {
    if (mol.is_real(i) && bf.disc[i] == -1) bf.dfs(i, -1);
  }
  return bf.on_cycle;
}

namespace {

constexpr std::array<Element, 4> kHeavy{Element::C, Element::N, Element::O,
                                        Element::F};

Element draw_heavy(Rng& rng, const SamplerConfig& cfg) {
  double total = 0;
  for (double w : cfg.heavy_weights) total += w;
  double r = rng.uniform() * total;
  for (size_t k = 0; k < kHeavy.size(); ++k) {
    r -= cfg.heavy_weights[k];
    if (r < 0) return kHeavy[k];
  }
  return Element::C;
}

// One sampling attempt; empty result means the budget did not work out.
std::optional<MolecularGraph> try_sample(Rng& rng, int n_slots,
                                         const SamplerConfig& cfg) {
  const int budget = std::min(cfg.n_atoms_max, n_slots);
  if (budget < 2) return std::nullopt;

  const int heavy_cap = std::min(cfg.max_heavy, budget);
  int n_heavy = rng.uniform_int(1, std::max(1, heavy_cap));

  std::vector<Element> heavy(n_heavy);
  for (auto& e : heavy) e = draw_heavy(rng, cfg);

  MolecularGraph mol(n_slots);
  std::vector<int> remaining(n_heavy);
  for (int i = 0; i < n_heavy; ++i) {
    mol.set_element(i, heavy[i]);
    remaining[i] = valence_of(heavy[i]);
  }

  // Spanning tree: each new atom bonds to an earlier atom with spare valence.
  for (int i = 1; i < n_heavy; ++i) {
    std::vector<int> open;
    for (int j = 0; j < i; ++j)
      if (remaining[j] >= 1) open.push_back(j);
    if (open.empty()) return std::nullopt;
    int p = open[rng.uniform_int(0, static_cast<int>(open.size()) - 1)];
    mol.set_bond(i, p, 1);
    --remaining[i];
    --remaining[p];
  }

  // Ring closures and bond-order increments.
  for (int t = 0; t < cfg.extra_edge_tries; ++t) {
    if (rng.uniform() >= cfg.extra_edge_prob) continue;
    std::vector<std::pair<int, int>> cand;
    for (int i = 0; i < n_heavy; ++i) {
      for (int j = i + 1; j < n_heavy; ++j) {
        if (remaining[i] >= 1 && remaining[j] >= 1 && mol.bond(i, j) < 3) {
          cand.emplace_back(i, j);
        }
      }
    }
    if (cand.empty()) break;
    auto [i, j] = cand[rng.uniform_int(0, static_cast<int>(cand.size()) - 1)];
    mol.set_bond(i, j, mol.bond(i, j) + 1);
    --remaining[i];
    --remaining[j];
  }

  // Hydrogen fill. If it does not fit the budget, convert open valence into
  // extra internal bonds where possible, else give up on this attempt.
  int open_total = std::accumulate(remaining.begin(), remaining.end(), 0);
  while (n_heavy + open_total > budget) {
    std::vector<std::pair<int, int>> cand;
    for (int i = 0; i < n_heavy; ++i) {
      for (int j = i + 1; j < n_heavy; ++j) {
        if (remaining[i] >= 1 && remaining[j] >= 1 && mol.bond(i, j) >= 1 &&
            mol.bond(i, j) < 3) {
          cand.emplace_back(i, j);
        }
      }
    }
    if (cand.empty()) return std::nullopt;
    auto [i, j] = cand[rng.uniform_int(0, static_cast<int>(cand.size()) - 1)];
    mol.set_bond(i, j, mol.bond(i, j) + 1);
    --remaining[i];
    --remaining[j];
    open_total -= 2;
  }

  int slot = n_heavy;
  for (int i = 0; i < n_heavy; ++i) {
    while (remaining[i] > 0) {
      mol.set_element(slot, Element::H);
      mol.set_bond(slot, i, 1);
      --remaining[i];
      ++slot;
    }
  }

  // A lone heavy atom with all bonds consumed internally cannot happen, but a
  // pair like O=O is fine; reject anything that fails the full check.
  auto rep = validate(mol);
  if (!rep.ok || mol.n_real_atoms() == 0) return std::nullopt;
  if (connected_components(mol).size() != 1) return std::nullopt;
  return mol;
}

}  // namespace

MolecularGraph random_molecule(Rng& rng, int n_slots,
                               const SamplerConfig& cfg) {
  require(cfg.n_atoms_max <= n_slots, "n_atoms_max exceeds slot count");
  require(std::min(cfg.n_atoms_max, n_slots) >= 2,
          "no valid molecule fits in fewer than 2 atoms");
  for (int attempt = 0; attempt < 10000; ++attempt) {
    auto mol = try_sample(rng, n_slots, cfg);
    if (mol) return *mol;
  }
  // Unreachable for sane budgets: H2 always fits in 2 slots.
  MolecularGraph h2(n_slots);
  h2.set_element(0, Element::H);
  h2.set_element(1, Element::H);
  h2.set_bond(0, 1, 1);
  return h2;
}

MolecularGraph make_hcn(int n_slots) {
  require(n_slots >= 3, "HCN needs 3 slots");
  MolecularGraph mol(n_slots);
  mol.set_element(0, Element::H);
  mol.set_element(1, Element::C);
  mol.set_element(2, Element::N);
  mol.set_bond(0, 1, 1);
  mol.set_bond(1, 2, 3);
  return mol;
}

}  // namespace didgen
