// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "didgen/gcn.hpp"
#include "didgen/molgraph.hpp"
#include "didgen/record.hpp"

namespace didgen {

/// One atom-environment rule: an exact key (element, sorted bond-order
/// multiset, hetero-neighbor count clamped to 0..2, ring flag) or the
/// element's wildcard fallback, mapped to a dense class id and a logP
/// contribution.
struct ClassRule {
  Element element = Element::C;
  std::vector<int> orders;  // sorted ascending; empty for wildcard
  int hetero = 0;           // neighbors outside {C, H}, clamped to 0..2
  bool ring = false;
  bool wildcard = false;
  int class_id = -1;
  double contribution = 0.0;
};

/// Ordered rule set with dense class ids 0..K-1. Exact keys are unique and
/// every real element carries a wildcard fallback, so classification always
/// succeeds.
class ClassRuleTable {
 public:
  static ClassRuleTable from_file(const std::string& path);
  static ClassRuleTable from_string(const std::string& text);

  int n_classes() const { return static_cast<int>(rules_.size()); }
  const std::vector<ClassRule>& rules() const { return rules_; }
  const ClassRule& rule(int class_id) const { return rules_.at(class_id); }
  double contribution(int class_id) const {
    return rules_.at(class_id).contribution;
  }
  Vector contribution_vector() const;

  /// Dense ids of the classes belonging to one element, in table order.
  const std::vector<int>& classes_of(Element e) const;
  Element element_of(int class_id) const { return rules_.at(class_id).element; }

  /// Exact key match first, wildcard fallback second.
  int classify(Element e, const std::vector<int>& sorted_orders, int hetero,
               bool ring) const;

 private:
  void index();
  std::vector<ClassRule> rules_;
  std::map<std::string, int> exact_;
  std::array<int, kPaletteSize> fallback_{};
  std::array<std::vector<int>, kPaletteSize> by_element_;
};

/// The committed default table (also shipped at data/crippen_rules.txt).
const ClassRuleTable& default_rule_table();

/// Local-environment key lookup per real atom; NoAtom slots get -1.
std::vector<int> classify_atoms(const MolecularGraph& mol,
                                const ClassRuleTable& table);

/// Sum of per-atom class contributions, accumulated in slot order.
double crippen_logp(const MolecularGraph& mol, const ClassRuleTable& table);

/// Fixed-seed network standing in for an expensive property oracle, with an
/// affine rescale calibrated so dataset labels span roughly [1, 10].
struct TeacherParams {
  uint64_t seed = 42;
  GcnParams net;
  double gain = 1.0;
  double offset = 0.0;

  static TeacherParams make(uint64_t seed, double gain, double offset);
};

/// Teacher calibration/architecture file (seed, gain, offset).
TeacherParams load_teacher(const std::string& path);
void save_teacher(const std::string& path, const TeacherParams& teacher);

double teacher_property(const MolecularGraph& mol,
                        const TeacherParams& teacher);
double teacher_property_raw(const MolecularGraph& mol,
                            const TeacherParams& teacher);

/// Gain/offset mapping the raw 1st/99th percentiles onto [lo, hi].
std::pair<double, double> calibrate_teacher(
    const TeacherParams& teacher, const std::vector<MolecularGraph>& mols,
    double lo = 1.0, double hi = 10.0);

/// Nearest-rank percentile of a named property over a labeled dataset.
/// Throws std::invalid_argument on an unknown property name.
std::vector<double> percentile_targets(
    const std::vector<MoleculeRecord>& dataset, const std::string& property,
    const std::vector<double>& percentiles);

double nearest_rank_percentile(std::vector<double> values, double pct);

}  // namespace didgen
