// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "didgen/invert.hpp"
#include "didgen/oracles.hpp"

namespace didgen {

/// Ground-truth evaluator handle used for post-hoc verification.
struct Oracle {
  std::string property;
  std::function<double(const MolecularGraph&)> eval;
};

Oracle teacher_oracle(const TeacherParams& teacher);
Oracle logp_oracle(const ClassRuleTable& table);

struct RunReport {
  std::string task;
  std::string target;
  int n_requested = 0;
  int n_attempted = 0;
  int n_emitted = 0;
  double proxy_hit_rate = 0.0;   // emitted / attempted
  double oracle_mae = 0.0;       // |oracle - p| (point) or window distance
  double within_half = 0.0;      // fraction with |oracle - center| <= 0.5
  double in_target_rate = 0.0;   // oracle-side target satisfaction
  double diversity = -1.0;       // -1 when undefined (fewer than 2 molecules)
  int unique_count = 0;
  double wall_seconds = 0.0;     // shown on stdout, never serialized
  std::string config_hash;
};

/// All oracle-side numbers recomputed from the molecules themselves.
RunReport build_report(const std::string& task, const TargetSpec& target,
                       const std::vector<MolecularGraph>& mols,
                       const Oracle& oracle, int n_requested, int n_attempted,
                       const std::string& config_hash);

/// Structured-text report; wall time is excluded so reruns are
/// byte-identical.
void write_report(const std::string& path, const RunReport& report);
RunReport read_report(const std::string& path);

std::string report_table(const RunReport& report);

}  // namespace didgen
