// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "didgen/crippennet.hpp"
#include "didgen/gcn.hpp"
#include "didgen/gradcheck.hpp"
#include "didgen/graphbuild.hpp"
#include "didgen/oracles.hpp"

namespace didgen {

/// What to aim for: a point target with tolerance, or a closed window.
struct TargetSpec {
  enum class Kind { Point, Window };
  Kind kind = Kind::Point;
  double value = 0.0;  // point target p
  double tau = 0.01;   // point tolerance
  double lo = 0.0, hi = 0.0;
  std::string property = "gap";

  static TargetSpec point(double p, double tau, std::string property);
  static TargetSpec window(double lo, double hi, std::string property);

  bool met(double prediction) const;
  /// Stop test optionally tightened by a margin (window shrunk, tau scaled);
  /// emission is always re-checked against the untightened target.
  bool met_with_margin(double prediction, double margin) const;
  double center() const;
  std::string describe() const;
};

struct GenConfig {
  double lambda_l = 1.0;
  double lambda_s = 1.0;
  double lambda_c = 0.1;
  Vector composition;  // target fractions over real elements; sums to 1
  int n_slots = 16;
  int max_steps = 600;
  double lr = 0.05;
  double restart_noise = 0.05;
  double stop_margin = 0.0;
  enum class Init { Random, FromMolecule };
  Init init = Init::Random;
  bool masking = true;
  uint64_t seed = 99;
  int attempt_factor = 10;  // attempt budget = factor * requested molecules
  GraphBuildParams build;

  void check() const;
};

/// A trained predictor exposed to the generation loop: a differentiable
/// forward on relaxed tensors plus an exact eval on discrete molecules.
class ProxyModel {
 public:
  virtual ~ProxyModel() = default;
  virtual ad::Var forward(ad::Tape& tape, ad::Var adjacency,
                          ad::Var features) const = 0;
  virtual double predict(const MolecularGraph& mol) const = 0;
  virtual std::string name() const = 0;
};

/// Regressor-family proxy (also wraps the teacher via its affine rescale).
class GcnProxy : public ProxyModel {
 public:
  GcnProxy(GcnParams params, double gain = 1.0, double offset = 0.0)
      : params_(std::move(params)), gain_(gain), offset_(offset) {}

  ad::Var forward(ad::Tape& tape, ad::Var adjacency,
                  ad::Var features) const override;
  double predict(const MolecularGraph& mol) const override;
  std::string name() const override { return "gcn"; }

 private:
  mutable GcnParams params_;  // eval mode never mutates the BN state
  double gain_, offset_;
};

/// Classifier proxy; `oracle_exact` swaps the learned heads for the rule
/// table's hard classification (the inversion-fidelity mode).
class CrippenProxy : public ProxyModel {
 public:
  CrippenProxy(CrippenNetParams params, const ClassRuleTable& table,
               bool oracle_exact = false)
      : params_(std::move(params)), table_(&table),
        oracle_exact_(oracle_exact) {}

  ad::Var forward(ad::Tape& tape, ad::Var adjacency,
                  ad::Var features) const override;
  double predict(const MolecularGraph& mol) const override;
  std::string name() const override {
    return oracle_exact_ ? "crippennet-oracle" : "crippennet";
  }

 private:
  CrippenNetParams params_;
  const ClassRuleTable* table_;
  bool oracle_exact_;
};

/// Squared composition deviation of the relaxed features from the target
/// fractions (NoAtom excluded from the normalization), and its root.
ad::Var composition_sq(ad::Var features, const Vector& target);
ad::Var composition_loss(ad::Var features, const Vector& target);

struct LossBreakdown {
  ad::Var total;
  double l_l = 0.0, l_s = 0.0, l_c = 0.0;  // forward values of the terms
};

/// (lambda_l L_l^2 + lambda_s L_s^2 + lambda_c L_c^2) / (sum of lambdas);
/// L_l is |pred - p| for point targets, hinge distance for windows.
/// Throws std::invalid_argument when all lambdas are zero.
LossBreakdown total_loss(ad::Tape& tape, ad::Var prediction,
                         const TargetSpec& target, ad::Var adjacency,
                         ad::Var features, const GenConfig& cfg,
                         double lambda_s_effective);

struct TraceStep {
  int step = 0;
  double loss = 0.0, l_l = 0.0, l_s = 0.0, l_c = 0.0;
  double prediction = 0.0;
  int masked = 0;
  std::string event;  // "", "prune", "restart-noise", "emit", ...
};

struct GenerationTrace {
  std::vector<TraceStep> steps;
  int accepted_step = -1;
  uint64_t run_seed = 0;
};

struct GenerateOutcome {
  std::optional<MolecularGraph> mol;
  double final_prediction = 0.0;  // proxy re-evaluated on the emitted mol
  int steps_used = 0;
  GenerationTrace trace;
  std::string error;  // set when not converged

  bool ok() const { return mol.has_value(); }
};

/// One optimization run: build relaxed graph, forward the proxy, descend the
/// composite loss with valence masking, and emit once the discretized,
/// single-component molecule independently meets the target.
GenerateOutcome generate(const ProxyModel& proxy, const TargetSpec& target,
                         const GenConfig& cfg, uint64_t run_seed,
                         const std::vector<MolecularGraph>* init_pool);

struct BatchResult {
  std::vector<MolecularGraph> mols;
  std::vector<double> final_preds;
  std::vector<uint64_t> run_seeds;
  int n_requested = 0;
  int attempts = 0;
  bool budget_exhausted = false;
};

/// Runs generate over derived per-run seeds until n successes (or the
/// attempt budget ends). Results are identical for any jobs count: attempts
/// are scanned in index order regardless of completion order.
BatchResult generate_batch(const ProxyModel& proxy, const TargetSpec& target,
                           const GenConfig& cfg, int n, int jobs,
                           const std::vector<MolecularGraph>* init_pool,
                           std::vector<GenerationTrace>* traces = nullptr);

/// Weight sample rejected until every nonsmooth switch (rounding boundaries,
/// bell junctions, argmax ties, the valence threshold) is at least `margin`
/// away, so central differences see a smooth function.
GraphWeights safe_random_weights(Rng& rng, const GenConfig& cfg,
                                 double margin);

/// Full-pipeline gradient check (weights -> graph -> proxy -> loss) at
/// n_points safe random points.
ad::GradCheckReport pipeline_gradcheck(const ProxyModel& proxy,
                                       const TargetSpec& target,
                                       const GenConfig& cfg, uint64_t seed,
                                       int n_points);

}  // namespace didgen
