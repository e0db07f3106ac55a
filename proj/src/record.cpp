// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#include "didgen/record.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace didgen {

using nlohmann::json;

MoleculeRecord to_record(const MolecularGraph& mol) {
  return to_record(mol, {});
}

MoleculeRecord to_record(const MolecularGraph& mol,
                         const std::map<std::string, double>& properties) {
  MoleculeRecord rec;
  rec.properties = properties;
  std::vector<int> compact(mol.n_slots(), -1);
  for (int i = 0; i < mol.n_slots(); ++i) {
    if (!mol.is_real(i)) continue;
    compact[i] = static_cast<int>(rec.elements.size());
    rec.elements.push_back(mol.element(i));
  }
  for (int i = 0; i < mol.n_slots(); ++i) {
    if (compact[i] < 0) continue;
    for (int j = i + 1; j < mol.n_slots(); ++j) {
      if (compact[j] >= 0 && mol.bond(i, j) > 0) {
        rec.bonds.emplace_back(compact[i], compact[j], mol.bond(i, j));
      }
    }
  }
  return rec;
}

MolecularGraph to_graph(const MoleculeRecord& rec, int n_slots) {
  const int n = static_cast<int>(rec.elements.size());
  if (n > n_slots) {
    throw ParseError("record has " + std::to_string(n) +
                     " atoms, exceeding " + std::to_string(n_slots) +
                     " slots");
  }
  MolecularGraph mol(n_slots);
  for (int i = 0; i < n; ++i) mol.set_element(i, rec.elements[i]);
  for (const auto& [i, j, order] : rec.bonds) {
    if (i < 0 || j < 0 || i >= n || j >= n || i == j) {
      throw ParseError("bond index out of range: (" + std::to_string(i) +
                       "," + std::to_string(j) + ")");
    }
    mol.set_bond(i, j, order);
  }
  auto rep = validate(mol);
  if (!rep.ok) {
    throw ParseError("record decodes to an invalid molecule: " +
                     rep.violations.front());
  }
  return mol;
}

std::string format_real(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v,
                           std::chars_format::general, 12);
  return std::string(buf, res.ptr);
}

std::string serialize(const MoleculeRecord& rec) {
  std::ostringstream os;
  os << "{\"elements\":[";
  for (size_t i = 0; i < rec.elements.size(); ++i) {
    if (i) os << ',';
    os << '"' << symbol_of(rec.elements[i]) << '"';
  }
  os << "],\"bonds\":[";
  auto bonds = rec.bonds;
  std::sort(bonds.begin(), bonds.end());
  for (size_t b = 0; b < bonds.size(); ++b) {
    if (b) os << ',';
    auto [i, j, order] = bonds[b];
    os << '[' << i << ',' << j << ',' << order << ']';
  }
  os << "],\"properties\":{";
  bool first = true;
  for (const auto& [name, value] : rec.properties) {
    if (!first) os << ',';
    first = false;
    os << '"' << name << "\":" << format_real(value);
  }
  os << "}}";
  return os.str();
}

MoleculeRecord parse_record(const std::string& line, int line_no) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    // nlohmann reports a byte offset; on a single line that is the column.
    throw ParseError("line " + std::to_string(line_no) + ", column " +
                     std::to_string(e.byte) + ": " + e.what());
  }
  auto fail = [line_no](const std::string& msg) {
    throw ParseError("line " + std::to_string(line_no) + ": " + msg);
  };
  if (!doc.is_object()) fail("record must be an object");
  if (!doc.contains("elements") || !doc["elements"].is_array())
    fail("missing elements array");
  if (!doc.contains("bonds") || !doc["bonds"].is_array())
    fail("missing bonds array");

  MoleculeRecord rec;
  for (const auto& e : doc["elements"]) {
    if (!e.is_string()) fail("element entries must be strings");
    auto el = element_from_symbol(e.get<std::string>());
    if (!el || *el == Element::NoAtom)
      fail("unknown element symbol '" + e.get<std::string>() + "'");
    rec.elements.push_back(*el);
  }
  const int n = static_cast<int>(rec.elements.size());
  for (const auto& b : doc["bonds"]) {
    if (!b.is_array() || b.size() != 3 || !b[0].is_number_integer() ||
        !b[1].is_number_integer() || !b[2].is_number_integer()) {
      fail("bond entries must be [i,j,order] integer triples");
    }
    int i = b[0].get<int>(), j = b[1].get<int>(), order = b[2].get<int>();
    if (i >= j) fail("bond endpoints must satisfy i<j");
    if (i < 0 || j >= n) fail("bond index out of range");
    if (order < 1 || order > 3) fail("bond order out of range");
    rec.bonds.emplace_back(i, j, order);
  }
  if (doc.contains("properties")) {
    if (!doc["properties"].is_object()) fail("properties must be an object");
    for (const auto& [name, value] : doc["properties"].items()) {
      if (!value.is_number()) fail("property '" + name + "' must be a number");
      rec.properties[name] = value.get<double>();
    }
  }
  return rec;
}

std::vector<MoleculeRecord> read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path);
  std::vector<MoleculeRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    records.push_back(parse_record(line, line_no));
  }
  return records;
}

void write_dataset(const std::string& path,
                   const std::vector<MoleculeRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset file: " + path);
  for (const auto& rec : records) out << serialize(rec) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace didgen
