// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "didgen/molgraph.hpp"
#include "didgen/rng.hpp"
#include "didgen/tape.hpp"

namespace didgen {

/// Index map between the packed upper-triangle weight vector and matrix
/// positions (i, j), i < j, row-major.
inline int n_pairs(int n) { return n * (n - 1) / 2; }
int upper_index(int i, int j, int n);
std::pair<int, int> index_pair(int k, int n);

/// Trainable degrees of freedom of one molecular graph: one weight per atom
/// pair (squared into bond strength) and one gating weight per slot that
/// picks between the two valence-1 elements (H vs F).
struct GraphWeights {
  Vector w_adj;  // (n^2 - n) / 2
  Vector w_fea;  // n
  int n_slots = 0;

  static GraphWeights zeros(int n_slots);
};

/// Bell curve that scores how well a bond-order sum x matches an element
/// valence b: a Gaussian of width sigma around b, continued by its tangent
/// lines beyond |x - b| = x0 so the score stays C^1 and keeps a nonzero
/// slope everywhere.
struct BellParams {
  double c0 = 1.0;
  double c1 = 0.0;
  double c2 = 0.5;   // relative height at the tangent junction
  double sigma = 0.35;

  double x0() const;  // sigma * sqrt(-ln c2)
  void check() const;
};

double bell_value(double x, double center, const BellParams& p);
double bell_derivative(double x, double center, const BellParams& p);

struct GraphBuildParams {
  double a_round = 0.1;
  double a_max = 0.1;
  double b_max = 0.05;
  BellParams bell;
};

/// Differentiable graph: near-integer adjacency (N x N) and near-one-hot
/// features (N x (P+1), last column = valence electrons), plus the weight
/// leaves gradients flow back to.
struct DiffGraph {
  ad::Var adjacency;
  ad::Var features;
  ad::Var w_adj;
  ad::Var w_fea;
};

/// w -> squared upper triangle -> symmetrized -> sloped rounding. The result
/// is symmetric with zero diagonal and entries within a_round/2 of integers.
ad::Var build_adjacency(ad::Tape& tape, ad::Var w_adj, int n_slots,
                        double a_round);

/// Adjacency -> per-row bond sums -> per-element bell scores, gated on the
/// H/F pair by a logistic of w_fea -> sloped row max -> one-hot block with
/// the valence-electron column appended.
ad::Var build_features(ad::Tape& tape, ad::Var adjacency, ad::Var w_fea,
                       const GraphBuildParams& params);

DiffGraph build_diff_graph(ad::Tape& tape, const GraphWeights& w,
                           const GraphBuildParams& params,
                           bool trainable = true);

/// Strategy 1: sum of all bond orders in rows whose bond sum exceeds the
/// threshold (penalizes over-valent atoms through the loss).
ad::Var valence_penalty(ad::Var adjacency, double threshold = 4.5);

/// Plain (tape-free) mirrors of the builders, used for discretization,
/// masking and cross-checks.
Matrix adjacency_values(const Vector& w_adj, int n_slots, double a_round);
Matrix feature_values(const Matrix& adjacency, const Vector& w_fea,
                      const GraphBuildParams& params);

/// Exact tensors of a discrete molecule: integer-valued adjacency and exact
/// one-hot features (the zero-noise fixed points of the relaxation).
std::pair<Matrix, Matrix> exact_tensors(const MolecularGraph& mol);

struct MaskResult {
  Vector w;                    // corrected weights
  std::vector<int> reverted;   // w_adj indices reset to their previous value
};

/// Strategy 2: after an optimizer step, revert the weight entries whose bonds
/// increased while their row exceeds the valence threshold, largest increase
/// first, only until the row is back at or below the threshold.
MaskResult mask_weight_updates(const Vector& w_prev, const Vector& w_next,
                               int n_slots, double a_round,
                               double threshold = 4.5);

struct DiscretizeResult {
  std::optional<MolecularGraph> mol;
  std::string error;
  bool ok() const { return mol.has_value(); }
};

/// Hard commitment: round the adjacency, take each row's one-hot argmax as
/// the element, and validate. A mismatch between rounded valence and element
/// is reported as an error, never silently dropped.
DiscretizeResult discretize(const Matrix& adjacency, const Matrix& features);
DiscretizeResult discretize_weights(const GraphWeights& w,
                                    const GraphBuildParams& params);

/// Inverse construction: weights that rebuild `mol` exactly at zero noise
/// (sqrt of bond orders; gate weights pushed to the correct side for H/F).
/// Throws std::invalid_argument when the molecule exceeds n_slots.
GraphWeights weights_from_molecule(const MolecularGraph& mol, int n_slots,
                                   double noise_scale, Rng& rng);

}  // namespace didgen
