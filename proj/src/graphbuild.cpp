// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#include "didgen/graphbuild.hpp"

#include <algorithm>
#include <cmath>

namespace didgen {

using ad::Tape;
using ad::Var;

int upper_index(int i, int j, int n) {
  require(0 <= i && i < j && j < n, "upper_index: need 0 <= i < j < n");
  return i * (2 * n - i - 1) / 2 + (j - i - 1);
}

std::pair<int, int> index_pair(int k, int n) {
  require(k >= 0 && k < n_pairs(n), "index_pair: k out of range");
  int i = 0;
  int row_len = n - 1;
  while (k >= row_len) {
    k -= row_len;
    ++i;
    --row_len;
  }
  return {i, i + 1 + k};
}

GraphWeights GraphWeights::zeros(int n_slots) {
  GraphWeights w;
  w.n_slots = n_slots;
  w.w_adj = Vector::Zero(n_pairs(n_slots));
  w.w_fea = Vector::Zero(n_slots);
  return w;
}

double BellParams::x0() const { return sigma * std::sqrt(-std::log(c2)); }

void BellParams::check() const {
  require(c2 > 0.0 && c2 < 1.0, "bell: c2 must be in (0,1)");
  require(sigma > 0.0, "bell: sigma must be positive");
}

double bell_value(double x, double center, const BellParams& p) {
  const double u = x - center;
  const double x0 = p.x0();
  if (std::abs(u) < x0) {
    return p.c0 * std::exp(-(u / p.sigma) * (u / p.sigma)) + p.c1;
  }
  // Tangent-line continuation: value c0*c2 and slope -+2*c0*c2*x0/sigma^2 at
  // the junctions keep the curve C1.
  const double edge = p.c0 * p.c2;
  const double slope = -2.0 * p.c0 * p.c2 * x0 / (p.sigma * p.sigma);
  if (u >= x0) return edge + slope * (u - x0) + p.c1;
  return edge - slope * (u + x0) + p.c1;
}

double bell_derivative(double x, double center, const BellParams& p) {
  const double u = x - center;
  const double x0 = p.x0();
  if (std::abs(u) < x0) {
    return p.c0 * std::exp(-(u / p.sigma) * (u / p.sigma)) *
           (-2.0 * u / (p.sigma * p.sigma));
  }
  const double slope = -2.0 * p.c0 * p.c2 * x0 / (p.sigma * p.sigma);
  return u >= x0 ? slope : -slope;
}

namespace {

// Scatter the packed pair vector into a symmetric zero-diagonal matrix.
Var symmetrize_pairs(Tape& tape, Var w_sq, int n) {
  const Matrix& wv = tape.value(w_sq);
  require(wv.cols() == 1 && wv.rows() == n_pairs(n),
          "adjacency weights: expected " + std::to_string(n_pairs(n)) +
              " entries, got " + std::to_string(wv.rows()));
  Matrix out = Matrix::Zero(n, n);
  for (int k = 0; k < wv.rows(); ++k) {
    auto [i, j] = index_pair(k, n);
    out(i, j) = wv(k, 0);
    out(j, i) = wv(k, 0);
  }
  int pw = w_sq.id;
  return tape.make(std::move(out), tape.requires_grad(pw),
                   [pw, n](Tape& t, int self) {
                     const Matrix& g = t.grad_of(self);
                     Matrix gw(n_pairs(n), 1);
                     for (int k = 0; k < gw.rows(); ++k) {
                       auto [i, j] = index_pair(k, n);
                       gw(k, 0) = g(i, j) + g(j, i);
                     }
                     t.add_grad(pw, gw);
                   },
                   "symmetrize_pairs");
}

// Per-element bell scores of the row bond sums: out(i, j) = f_bj(x_i).
Var bell_columns(Tape& tape, Var bond_sums, const BellParams& bell) {
  const Matrix& x = tape.value(bond_sums);
  require(x.cols() == 1, "bell_columns expects a column vector");
  const long n = x.rows();
  Matrix out(n, kPaletteSize);
  for (long i = 0; i < n; ++i) {
    for (int j = 0; j < kPaletteSize; ++j) {
      out(i, j) = bell_value(x(i, 0), kElements[j].valence, bell);
    }
  }
  int px = bond_sums.id;
  Matrix saved_x = x;
  return tape.make(std::move(out), tape.requires_grad(px),
                   [px, saved_x, bell](Tape& t, int self) {
                     const Matrix& g = t.grad_of(self);
                     Matrix gx(saved_x.rows(), 1);
                     for (long i = 0; i < saved_x.rows(); ++i) {
                       double acc = 0;
                       for (int j = 0; j < kPaletteSize; ++j) {
                         acc += g(i, j) * bell_derivative(
                                              saved_x(i, 0),
                                              kElements[j].valence, bell);
                       }
                       gx(i, 0) = acc;
                     }
                     t.add_grad(px, gx);
                   },
                   "bell_columns");
}

Vector valence_electron_vector() {
  Vector ve(kPaletteSize);
  for (int j = 0; j < kPaletteSize; ++j) ve[j] = kElements[j].valence_electrons;
  return ve;
}

}  // namespace

Var build_adjacency(Tape& tape, Var w_adj, int n_slots, double a_round) {
  Var squared = ad::square(w_adj);
  Var sym = symmetrize_pairs(tape, squared, n_slots);
  return ad::sloped_round(sym, a_round);
}

Var build_features(Tape& tape, Var adjacency, Var w_fea,
                   const GraphBuildParams& params) {
  params.bell.check();
  const long n = tape.value(adjacency).rows();
  require(tape.value(w_fea).rows() == n && tape.value(w_fea).cols() == 1,
          "w_fea must be n_slots x 1");

  Var sums = ad::row_sums(adjacency);
  Var bells = bell_columns(tape, sums, params.bell);

  // Gate only the degenerate valence-1 pair: H takes 1-s, F takes s.
  Var s = ad::sigmoid(w_fea);
  Var one_minus_s = ad::add_scalar(ad::scale(s, -1.0), 1.0);
  Var ones = tape.constant(Matrix::Ones(n, 1));
  std::vector<Var> gate_cols(kPaletteSize, ones);
  gate_cols[static_cast<int>(Element::H)] = one_minus_s;
  gate_cols[static_cast<int>(Element::F)] = s;
  Var gates = ad::hconcat(gate_cols);

  Var scores = ad::cmul(bells, gates);
  Var onehot = ad::sloped_max_rows(scores, params.a_max, params.b_max);
  Var ve = ad::matmul(onehot, tape.constant(valence_electron_vector()));
  return ad::hconcat({onehot, ve});
}

DiffGraph build_diff_graph(Tape& tape, const GraphWeights& w,
                           const GraphBuildParams& params, bool trainable) {
  DiffGraph dg;
  dg.w_adj = tape.leaf(w.w_adj, trainable);
  dg.w_fea = tape.leaf(w.w_fea, trainable);
  dg.adjacency = build_adjacency(tape, dg.w_adj, w.n_slots, params.a_round);
  dg.features = build_features(tape, dg.adjacency, dg.w_fea, params);
  return dg;
}

Var valence_penalty(Var adjacency, double threshold) {
  Tape* t = adjacency.tape;
  const Matrix& a = t->value(adjacency);
  Vector sums = a.rowwise().sum();
  double total = 0;
  std::vector<char> offending(a.rows(), 0);
  for (long i = 0; i < a.rows(); ++i) {
    if (sums[i] > threshold) {
      offending[i] = 1;
      total += sums[i];
    }
  }
  Matrix out(1, 1);
  out(0, 0) = total;
  int pa = adjacency.id;
  long r = a.rows(), c = a.cols();
  return t->make(std::move(out), t->requires_grad(pa),
                 [pa, offending = std::move(offending), r, c](Tape& t,
                                                              int self) {
                   const double g = t.grad_of(self)(0, 0);
                   Matrix ga = Matrix::Zero(r, c);
                   for (long i = 0; i < r; ++i) {
                     if (offending[i]) ga.row(i).setConstant(g);
                   }
                   t.add_grad(pa, ga);
                 },
                 "valence_penalty");
}

Matrix adjacency_values(const Vector& w_adj, int n_slots, double a_round) {
  require(w_adj.size() == n_pairs(n_slots),
          "adjacency weights: wrong length " + std::to_string(w_adj.size()));
  Matrix out = Matrix::Zero(n_slots, n_slots);
  for (int k = 0; k < w_adj.size(); ++k) {
    auto [i, j] = index_pair(k, n_slots);
    const double s = w_adj[k] * w_adj[k];
    const double r = std::floor(s + 0.5);
    const double v = r + a_round * (s - r);
    out(i, j) = v;
    out(j, i) = v;
  }
  return out;
}

Matrix feature_values(const Matrix& adjacency, const Vector& w_fea,
                      const GraphBuildParams& params) {
  const long n = adjacency.rows();
  Matrix scores(n, kPaletteSize);
  for (long i = 0; i < n; ++i) {
    const double x = adjacency.row(i).sum();
    const double s = 1.0 / (1.0 + std::exp(-w_fea[i]));
    for (int j = 0; j < kPaletteSize; ++j) {
      double gate = 1.0;
      if (j == static_cast<int>(Element::H)) gate = 1.0 - s;
      if (j == static_cast<int>(Element::F)) gate = s;
      scores(i, j) = bell_value(x, kElements[j].valence, params.bell) * gate;
    }
  }
  Matrix out(n, kPaletteSize + 1);
  const Vector ve = valence_electron_vector();
  for (long i = 0; i < n; ++i) {
    int best = 0;
    for (int j = 1; j < kPaletteSize; ++j) {
      if (scores(i, j) > scores(i, best)) best = j;
    }
    for (int j = 0; j < kPaletteSize; ++j) {
      out(i, j) = (j == best) ? 1.0 - params.a_max * (1.0 - scores(i, j))
                              : params.b_max * scores(i, j);
    }
    out(i, kPaletteSize) = out.row(i).head(kPaletteSize).dot(ve);
  }
  return out;
}

std::pair<Matrix, Matrix> exact_tensors(const MolecularGraph& mol) {
  const int n = mol.n_slots();
  Matrix a = mol.adjacency().cast<double>();
  Matrix f = Matrix::Zero(n, kPaletteSize + 1);
  for (int i = 0; i < n; ++i) {
    const int e = static_cast<int>(mol.element(i));
    f(i, e) = 1.0;
    f(i, kPaletteSize) = kElements[e].valence_electrons;
  }
  return {std::move(a), std::move(f)};
}

MaskResult mask_weight_updates(const Vector& w_prev, const Vector& w_next,
                               int n_slots, double a_round, double threshold) {
  require(w_prev.size() == w_next.size() &&
              w_prev.size() == n_pairs(n_slots),
          "mask: weight length mismatch");
  const Matrix a_prev = adjacency_values(w_prev, n_slots, a_round);
  const Matrix a_next = adjacency_values(w_next, n_slots, a_round);

  MaskResult res;
  res.w = w_next;
  std::vector<char> reverted(w_next.size(), 0);

  Vector row_sum = a_next.rowwise().sum();
  for (int i = 0; i < n_slots; ++i) {
    // Account for reverts chosen while processing earlier rows: each revert
    // restores the pair entry exactly, so the running sums stay exact.
    double current = row_sum[i];
    if (current <= threshold) continue;

    std::vector<std::pair<double, int>> grew;  // (increase, partner)
    for (int j = 0; j < n_slots; ++j) {
      if (j == i) continue;
      const double inc = a_next(i, j) - a_prev(i, j);
      if (inc > 0) {
        const int k = upper_index(std::min(i, j), std::max(i, j), n_slots);
        if (!reverted[k]) grew.emplace_back(inc, j);
      }
    }
    // Largest increase first; partner index breaks ties deterministically.
    std::sort(grew.begin(), grew.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (const auto& [inc, j] : grew) {
      if (current <= threshold) break;
      const int k = upper_index(std::min(i, j), std::max(i, j), n_slots);
      reverted[k] = 1;
      res.reverted.push_back(k);
      res.w[k] = w_prev[k];
      current -= inc;
      row_sum[i] -= inc;
      row_sum[j] -= inc;
    }
  }
  std::sort(res.reverted.begin(), res.reverted.end());
  return res;
}

DiscretizeResult discretize(const Matrix& adjacency, const Matrix& features) {
  const int n = static_cast<int>(adjacency.rows());
  require(features.rows() == n && features.cols() == kPaletteSize + 1,
          "discretize: feature shape mismatch");
  MolecularGraph mol(n);
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int j = 1; j < kPaletteSize; ++j) {
      if (features(i, j) > features(i, best)) best = j;
    }
    mol.set_element(i, static_cast<Element>(best));
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const int order =
          static_cast<int>(std::floor(adjacency(i, j) + 0.5));
      if (order > 0) mol.set_bond(i, j, order);
    }
  }
  auto rep = validate(mol);
  if (!rep.ok) {
    return {std::nullopt,
            "valence mismatch after rounding: " + rep.violations.front()};
  }
  return {std::move(mol), ""};
}

DiscretizeResult discretize_weights(const GraphWeights& w,
                                    const GraphBuildParams& params) {
  const Matrix a = adjacency_values(w.w_adj, w.n_slots, params.a_round);
  const Matrix f = feature_values(a, w.w_fea, params);
  return discretize(a, f);
}

GraphWeights weights_from_molecule(const MolecularGraph& mol, int n_slots,
                                   double noise_scale, Rng& rng) {
  require(mol.n_slots() <= n_slots,
          "molecule with " + std::to_string(mol.n_slots()) +
              " slots exceeds capacity " + std::to_string(n_slots));
  GraphWeights w = GraphWeights::zeros(n_slots);
  for (int i = 0; i < mol.n_slots(); ++i) {
    for (int j = i + 1; j < mol.n_slots(); ++j) {
      const int order = mol.bond(i, j);
      if (order > 0) {
        w.w_adj[upper_index(i, j, n_slots)] = std::sqrt(double(order));
      }
    }
  }
  for (int i = 0; i < mol.n_slots(); ++i) {
    if (mol.element(i) == Element::H) w.w_fea[i] = -4.0;
    if (mol.element(i) == Element::F) w.w_fea[i] = 4.0;
  }
  if (noise_scale > 0) {
    for (int k = 0; k < w.w_adj.size(); ++k)
      w.w_adj[k] += noise_scale * rng.normal();
    for (int i = 0; i < w.w_fea.size(); ++i)
      w.w_fea[i] += noise_scale * rng.normal();
  }
  return w;
}

}  // namespace didgen
