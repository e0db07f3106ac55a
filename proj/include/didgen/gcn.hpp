// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "didgen/graphbuild.hpp"
#include "didgen/rng.hpp"
#include "didgen/tape.hpp"

namespace didgen {

/// Architecture of the property-regressor family: an embedding, n_conv graph
/// convolutions H' = act(BN((A + I) H W)), a learned pooling layer
/// H_pooled = (act(H w))^T H, and a fully connected stack ending in a scalar.
struct GcnConfig {
  int input_width = kPaletteSize + 1;
  int embed = 48;
  int n_conv = 3;
  std::vector<int> fc{48, 32};  // hidden widths; final scalar layer implied
  double dropout = 0.1;
  double bn_momentum = 0.1;

  bool operator==(const GcnConfig&) const = default;
};

struct GcnParams {
  GcnConfig cfg;
  Matrix w_embed;               // input_width x embed
  std::vector<Matrix> w_conv;   // embed x embed
  std::vector<Matrix> bn_gamma;  // 1 x embed
  std::vector<Matrix> bn_beta;   // 1 x embed
  std::vector<ad::BatchNormState> bn;
  Matrix w_pool;                // embed x 1
  std::vector<Matrix> w_fc;     // widths chain ending in ... x 1
  std::vector<Matrix> b_fc;     // 1 x width biases

  int n_params() const;
};

/// Weights ~ Normal(0, 1/fan_in); batch-norm starts as identity.
GcnParams init_gcn_params(const GcnConfig& cfg, Rng& rng);

/// Parameter leaves lifted onto a tape (trainable or frozen).
struct GcnTapeParams {
  ad::Var w_embed;
  std::vector<ad::Var> w_conv, bn_gamma, bn_beta;
  ad::Var w_pool;
  std::vector<ad::Var> w_fc, b_fc;

  std::vector<ad::Var> all() const;
};

GcnTapeParams lift_gcn(ad::Tape& tape, const GcnParams& p, bool trainable);

/// Batched forward over per-molecule adjacency/feature Vars; returns a B x 1
/// prediction. Train mode draws dropout masks from `rng` and updates the
/// batch-norm running statistics in `state_owner`.
ad::Var gcn_forward(ad::Tape& tape, const GcnTapeParams& tp,
                    GcnParams& state_owner,
                    const std::vector<ad::Var>& adjacency,
                    const std::vector<ad::Var>& features, bool train,
                    Rng* rng);

/// Tape-free eval-mode forward for one molecule; the fast path for oracle
/// labeling and emission re-checks. Bit-identical to the tape forward in
/// eval mode.
double gcn_eval(const GcnParams& p, const Matrix& adjacency,
                const Matrix& features);

}  // namespace didgen
