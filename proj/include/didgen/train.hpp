// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "didgen/crippennet.hpp"
#include "didgen/gcn.hpp"
#include "didgen/oracles.hpp"
#include "didgen/record.hpp"

namespace didgen {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // classic L2 folded into the gradient
};

/// Adaptive-moment optimizer over an ordered parameter registry; the fixed
/// update order keeps training bit-reproducible.
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  void register_param(Matrix* p);
  void step(const std::vector<Matrix>& grads);
  int64_t steps_done() const { return t_; }

  const std::vector<Matrix>& moments1() const { return m_; }
  const std::vector<Matrix>& moments2() const { return v_; }
  void restore(int64_t t, std::vector<Matrix> m, std::vector<Matrix> v);

 private:
  AdamConfig cfg_;
  std::vector<Matrix*> params_;
  std::vector<Matrix> m_, v_;
  int64_t t_ = 0;
};

struct TrainConfig {
  int epochs = 60;
  int batch = 200;
  double lr = 1e-3;
  double weight_decay = 1e-6;
  double noise_sigma = 0.05;  // integer-noise injected into A and F
  double split = 0.8;
  uint64_t seed = 1234;
  int eval_every = 5;
  // classifier loop
  int cls_batches_per_epoch = 50;
  int cls_atoms_per_batch = 192;
  double cls_alpha = 2.0;
  double cls_epsilon = 1e-6;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double train_mae = 0.0;
  double test_mae = 0.0;
  double atom_accuracy = -1.0;  // classifier only
};

/// Versioned checkpoint: shapes + row-major values + config hash + optimizer
/// state, serialized as structured text.
struct Checkpoint {
  std::string kind;  // "regressor" | "classifier"
  std::string config_hash;
  int64_t epochs_done = 0;
  std::optional<GcnParams> gcn;
  std::optional<CrippenNetParams> crippen;
  int64_t adam_t = 0;
  std::vector<Matrix> adam_m, adam_v;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

struct RegressorResult {
  GcnParams params;
  std::vector<EpochMetrics> history;
  Checkpoint checkpoint;  // params + optimizer state, hash left empty
};

struct ClassifierResult {
  CrippenNetParams params;
  std::vector<EpochMetrics> history;
  Checkpoint checkpoint;
};

/// Regressor training: 80/20 split, per-batch Gaussian noise around the
/// integer tensors, MAE loss, adaptive moments. Deterministic per
/// (seed, config, dataset).
RegressorResult train_regressor(const std::vector<MoleculeRecord>& dataset,
                                const std::string& property, int n_slots,
                                const GcnConfig& arch, const TrainConfig& cfg,
                                const Checkpoint* resume = nullptr);

/// Classifier training: class-balanced atom sampling with repetition
/// (weights (1 + alpha m)/(f + eps), misclassification rates refreshed each
/// epoch), whole-molecule scoring with selected-atom NLL.
ClassifierResult train_classifier(const std::vector<MoleculeRecord>& dataset,
                                  const ClassRuleTable& table, int n_slots,
                                  const CrippenNetConfig& arch,
                                  const TrainConfig& cfg,
                                  const Checkpoint* resume = nullptr);

struct EvalMetrics {
  int n = 0;
  double mae = 0.0;
  double atom_accuracy = -1.0;                     // classifiers only
  std::vector<std::pair<double, double>> scatter;  // (truth, prediction)
  std::map<std::string, double> bucket_mae;        // truth-range buckets
};

EvalMetrics evaluate_regressor(const GcnParams& params,
                               const std::vector<MoleculeRecord>& dataset,
                               const std::string& property, int n_slots);
EvalMetrics evaluate_classifier(const CrippenNetParams& params,
                                const ClassRuleTable& table,
                                const std::vector<MoleculeRecord>& dataset,
                                const std::string& property, int n_slots);

void write_scatter(const std::string& path,
                   const std::vector<std::pair<double, double>>& scatter);

/// Per-epoch metrics, one structured-text record per line (appends).
void append_metrics(const std::string& path,
                    const std::vector<EpochMetrics>& history,
                    const std::string& kind);

}  // namespace didgen
