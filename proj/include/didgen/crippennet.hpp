// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "didgen/oracles.hpp"
#include "didgen/tape.hpp"

namespace didgen {

/// Classifier that mirrors the structure of the rule-table oracle: weightless
/// multi-hop graph features [F, AF, ..., A^h F] feed per-element two-layer
/// heads whose within-element softmax, masked by the one-hot element block,
/// yields class probabilities; logP is the probability-weighted sum of class
/// contributions.
struct CrippenNetConfig {
  int n_hops = 4;        // extra hops; feature blocks = n_hops + 1
  int head_hidden = 100;

  bool operator==(const CrippenNetConfig&) const = default;
};

struct CrippenNetHead {
  Matrix w1;  // feat_width x hidden
  Matrix b1;  // 1 x hidden
  Matrix w2;  // hidden x n_classes(element)
  Matrix b2;  // 1 x n_classes(element)
};

struct CrippenNetParams {
  CrippenNetConfig cfg;
  // One head per element with more than one class, palette-indexed;
  // single-class elements bypass classification entirely.
  std::vector<std::optional<CrippenNetHead>> heads;
  int feature_width() const { return (cfg.n_hops + 1) * (kPaletteSize + 1); }
  int n_params() const;
};

CrippenNetParams init_crippennet(const ClassRuleTable& table,
                                 const CrippenNetConfig& cfg, Rng& rng);

struct CrippenNetHeadVars {
  ad::Var w1, b1, w2, b2;
};

struct CrippenNetTapeParams {
  std::vector<std::optional<CrippenNetHeadVars>> heads;
  std::vector<ad::Var> all() const;
};

CrippenNetTapeParams lift_crippennet(ad::Tape& tape,
                                     const CrippenNetParams& p,
                                     bool trainable);

struct CrippenNetOut {
  ad::Var log_probs;  // N x K within-element log-softmax (global class cols)
  ad::Var logp;       // 1 x 1 masked probability-weighted contribution sum
};

/// Differentiable forward on (possibly relaxed) adjacency/feature Vars.
CrippenNetOut crippennet_forward(ad::Tape& tape,
                                 const CrippenNetTapeParams& tp,
                                 const CrippenNetParams& p,
                                 const ClassRuleTable& table, ad::Var a,
                                 ad::Var f);

/// Inversion-fidelity mode: the learned heads are replaced by the oracle's
/// hard classification of the rounded current graph (held constant for the
/// step); gradients still flow through the one-hot mask.
ad::Var crippennet_oracle_logp(ad::Tape& tape, const ClassRuleTable& table,
                               ad::Var a, ad::Var f);

struct CrippenNetPrediction {
  std::vector<int> classes;  // argmax within the atom's element block; -1 pad
  Matrix probs;              // N x K, masked (rows of NoAtom slots are zero)
  double logp = 0.0;
};

/// Tape-free eval on a discrete molecule.
CrippenNetPrediction crippennet_predict(const CrippenNetParams& p,
                                        const ClassRuleTable& table,
                                        const MolecularGraph& mol);

/// Oracle-exact plain prediction: classify_atoms + contribution sum, with the
/// exact same accumulation order as crippen_logp.
CrippenNetPrediction crippennet_predict_oracle(const ClassRuleTable& table,
                                               const MolecularGraph& mol);

/// Class-balanced sampling weight w = (1 + alpha * m) / (f + eps).
double sample_weight(double freq, double misclass_rate, double alpha,
                     double eps);

}  // namespace didgen
