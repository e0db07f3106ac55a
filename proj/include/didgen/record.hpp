// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "didgen/molgraph.hpp"

namespace didgen {

/// One molecule plus named properties, the unit of the line-oriented dataset
/// format. Bonds are stored as (i, j, order) with i < j over compacted real
/// atoms.
struct MoleculeRecord {
  std::vector<Element> elements;
  std::vector<std::tuple<int, int, int>> bonds;
  std::map<std::string, double> properties;

  bool operator==(const MoleculeRecord& o) const = default;
};

/// Drops NoAtom slots and reindexes; slot order of real atoms is preserved.
MoleculeRecord to_record(const MolecularGraph& mol);
MoleculeRecord to_record(const MolecularGraph& mol,
                         const std::map<std::string, double>& properties);

/// Expands a record back into an n_slots graph (real atoms in slots 0..k-1).
/// Throws ParseError if the record does not describe a valid molecule.
MolecularGraph to_graph(const MoleculeRecord& rec, int n_slots);

/// One-line canonical encoding: fixed key order, sorted property names,
/// reals at 12 significant digits; parse(serialize(r)) re-serializes to the
/// same bytes.
std::string serialize(const MoleculeRecord& rec);

/// Parses one line; line_no is only used to compose error messages.
/// Throws ParseError with line/column context on malformed input.
MoleculeRecord parse_record(const std::string& line, int line_no = 1);

/// Whole-file helpers over the line format (UTF-8, LF endings).
std::vector<MoleculeRecord> read_dataset(const std::string& path);
void write_dataset(const std::string& path,
                   const std::vector<MoleculeRecord>& records);

/// Locale-independent shortest-form formatting at 12 significant digits.
std::string format_real(double v);

}  // namespace didgen
