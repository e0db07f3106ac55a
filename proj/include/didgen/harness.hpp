// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <ostream>
#include <string>

#include "didgen/config.hpp"
#include "didgen/report.hpp"
#include "didgen/train.hpp"

namespace didgen::harness {

/// Exit-code contract shared by every command.
inline constexpr int kOk = 0;
inline constexpr int kUsageError = 1;
inline constexpr int kBudgetError = 2;
inline constexpr int kIoError = 3;

/// Random molecules labeled with both oracles; deterministic per seed.
std::vector<MoleculeRecord> synthesize_dataset(const Config& cfg, int n,
                                               uint64_t seed);

int run_gen_dataset(const Config& cfg, int n, uint64_t seed,
                    const std::string& out_path, std::ostream& log);

struct TrainOptions {
  std::string task;  // "gap" | "logp"
  std::string dataset_path;
  std::string out_checkpoint;
  std::string metrics_path;  // optional
  std::string resume_from;   // optional checkpoint path
};
int run_train(const Config& cfg, const TrainOptions& opt, std::ostream& log);

struct GenerateOptions {
  std::string checkpoint_path;
  std::optional<double> target;      // point target or window center
  std::optional<double> window;      // half-width -> [target-w, target+w]
  double tau = 0.01;
  std::optional<double> target_percentile;
  std::string dataset_path;  // percentile resolution and from-dataset init
  int n = 10;
  std::string out_path;
  std::string report_path;   // optional
  std::string trace_dir;     // optional, one trace file per emitted run
  int jobs = 1;
  std::optional<std::string> init_override;  // "random" | "from-dataset"
  bool oracle_exact = false;                 // classifier only
};
int run_generate(const Config& cfg, const GenerateOptions& opt,
                 std::ostream& log);

struct EvaluateOptions {
  std::string molecules_path;
  std::string task;  // "gap" | "logp"
  std::optional<double> target;
  std::optional<double> window;
  double tau = 0.01;
  std::string checkpoint_path;  // optional, enables the proxy scatter
  std::string report_path;      // optional
  std::string scatter_path;     // optional
};
int run_evaluate(const Config& cfg, const EvaluateOptions& opt,
                 std::ostream& log);

int run_gradcheck(const Config& cfg, const std::string& corrupt_op,
                  std::ostream& log);

/// Builds the TargetSpec shared by generate/evaluate from CLI-style flags.
TargetSpec resolve_target(const Config& cfg, const std::string& property,
                          std::optional<double> target,
                          std::optional<double> window, double tau,
                          std::optional<double> percentile,
                          const std::string& dataset_path);

}  // namespace didgen::harness
