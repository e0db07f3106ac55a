// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "didgen/tape.hpp"

namespace didgen::ad {

/// A scalar-valued function rebuilt on a fresh tape per evaluation: receives
/// the tape and the flattened input leaf, returns the scalar output Var.
using TapeFn = std::function<Var(Tape&, Var)>;

struct GradCheckReport {
  double max_rel_err = 0.0;
  int worst_index = -1;
  int checked = 0;
  /// Coordinates skipped because the function value jumps within eps of the
  /// probe point (e.g. a round-half-up boundary); these are flagged, not
  /// treated as failures.
  std::vector<int> near_discontinuity;
  bool passed(double tol) const { return max_rel_err <= tol; }
};

/// Compares the reverse-mode gradient of f at x against central finite
/// differences, coordinate by coordinate. x is flattened column-major.
GradCheckReport gradcheck(const TapeFn& f, const Matrix& x, double eps = 1e-6);

struct GradCheckSuiteEntry {
  std::string name;
  GradCheckReport report;
  double tolerance;
  bool pass;
};

/// Runs the per-op checks plus the full construction+proxy pipelines; used by
/// both the CLI command and the acceptance suite. `corrupt_op` perturbs the
/// named op's adjoint as a negative control ("sigmoid" supported).
std::vector<GradCheckSuiteEntry> gradcheck_suite(uint64_t seed,
                                                 const std::string& corrupt_op =
                                                     "");

}  // namespace didgen::ad
