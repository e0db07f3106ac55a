// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#include "didgen/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace didgen {

namespace {

std::string key_of(Element e, const std::vector<int>& orders, int hetero,
                   bool ring) {
  std::string key = symbol_of(e);
  key += '|';
  for (size_t i = 0; i < orders.size(); ++i) {
    if (i) key += ',';
    key += std::to_string(orders[i]);
  }
  key += '|';
  key += std::to_string(hetero);
  key += '|';
  key += ring ? '1' : '0';
  return key;
}

}  // namespace

ClassRuleTable ClassRuleTable::from_string(const std::string& text) {
  ClassRuleTable table;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    std::string sym, orders_s, hetero_s, ring_s;
    double contribution;
    if (!(ls >> sym)) continue;  // blank line
    if (!(ls >> orders_s >> hetero_s >> ring_s >> contribution)) {
      throw ParseError("rule table line " + std::to_string(line_no) +
                       ": expected <element> <orders|*> <hetero|*> <ring|*> "
                       "<contribution>");
    }
    ClassRule rule;
    auto el = element_from_symbol(sym);
    if (!el || *el == Element::NoAtom) {
      throw ParseError("rule table line " + std::to_string(line_no) +
                       ": unknown element '" + sym + "'");
    }
    rule.element = *el;
    rule.contribution = contribution;
    if (orders_s == "*") {
      if (hetero_s != "*" || ring_s != "*") {
        throw ParseError("rule table line " + std::to_string(line_no) +
                         ": wildcard rules must be '<element> * * *'");
      }
      rule.wildcard = true;
    } else {
      std::istringstream os(orders_s);
      std::string tok;
      while (std::getline(os, tok, ',')) rule.orders.push_back(std::stoi(tok));
      std::sort(rule.orders.begin(), rule.orders.end());
      rule.hetero = std::stoi(hetero_s);
      rule.ring = ring_s == "1";
      if (rule.hetero < 0 || rule.hetero > 2) {
        throw ParseError("rule table line " + std::to_string(line_no) +
                         ": hetero count must be 0..2");
      }
    }
    rule.class_id = static_cast<int>(table.rules_.size());
    table.rules_.push_back(std::move(rule));
  }
  table.index();
  return table;
}

ClassRuleTable ClassRuleTable::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open rule table: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

void ClassRuleTable::index() {
  fallback_.fill(-1);
  for (const auto& rule : rules_) {
    const int e = static_cast<int>(rule.element);
    by_element_[e].push_back(rule.class_id);
    if (rule.wildcard) {
      require(fallback_[e] == -1,
              std::string("duplicate wildcard rule for ") +
                  symbol_of(rule.element));
      fallback_[e] = rule.class_id;
      continue;
    }
    const auto key = key_of(rule.element, rule.orders, rule.hetero, rule.ring);
    require(!exact_.contains(key), "duplicate rule key: " + key);
    exact_[key] = rule.class_id;
  }
  for (int e = 0; e < kRealElements; ++e) {
    require(fallback_[e] != -1,
            std::string("element ") + kElements[e].symbol +
                " has no wildcard fallback rule");
  }
}

Vector ClassRuleTable::contribution_vector() const {
  Vector v(n_classes());
  for (int k = 0; k < n_classes(); ++k) v[k] = rules_[k].contribution;
  return v;
}

const std::vector<int>& ClassRuleTable::classes_of(Element e) const {
  return by_element_[static_cast<int>(e)];
}

int ClassRuleTable::classify(Element e, const std::vector<int>& sorted_orders,
                             int hetero, bool ring) const {
  const auto it = exact_.find(key_of(e, sorted_orders, hetero, ring));
  if (it != exact_.end()) return it->second;
  return fallback_[static_cast<int>(e)];
}

namespace {

// The committed surrogate logP table. Carbon values stay inside
// [-0.82, 0.54]; the alkane carbon, the hydrocarbon hydrogen and the ring
// carbon entries are the externally-fixed anchors.
constexpr const char* kDefaultRules = R"(# element orders hetero ring contribution
H 1 0 0 0.1230
H 1 1 0 0.1200
H * * * 0.1100
C 1,1,1,1 0 0 0.1441
C 1,1,1,1 0 1 0.1581
C 1,1,1,1 1 0 -0.2035
C 1,1,1,1 1 1 -0.1800
C 1,1,1,1 2 0 -0.2051
C 1,1,1,1 2 1 -0.2100
C 1,1,2 0 0 0.4500
C 1,1,2 0 1 0.2955
C 1,1,2 1 0 -0.0600
C 1,1,2 1 1 -0.1000
C 1,1,2 2 0 -0.2783
C 2,2 0 0 0.5400
C 2,2 0 1 0.5000
C 2,2 1 0 0.0200
C 1,3 0 0 0.5400
C 1,3 1 0 0.0500
C * * * 0.0800
N 1,1,1 0 0 -1.0190
N 1,1,1 0 1 -0.6000
N 1,1,1 1 0 -0.9500
N 1,1,1 1 1 -0.5800
N 1,1,1 2 0 -0.9200
N 1,1,1 2 1 -0.5500
N 1,2 0 0 -0.3000
N 1,2 1 0 -0.4000
N 1,2 2 0 -0.6000
N 3 0 0 -0.5660
N 3 1 0 -0.6000
N * * * -0.4458
O 1,1 0 0 -0.6400
O 1,1 0 1 -0.4500
O 1,1 1 0 -0.5500
O 1,1 1 1 -0.4200
O 1,1 2 0 -0.5800
O 2 0 0 -0.1200
O 2 1 0 -0.2000
O * * * -0.3339
F 1 0 0 0.4202
F 1 1 0 0.2000
F * * * 0.3000
)";

}  // namespace

const ClassRuleTable& default_rule_table() {
  static const ClassRuleTable table = ClassRuleTable::from_string(kDefaultRules);
  return table;
}

std::vector<int> classify_atoms(const MolecularGraph& mol,
                                const ClassRuleTable& table) {
  const auto ring = ring_membership(mol);
  std::vector<int> classes(mol.n_slots(), -1);
  for (int i = 0; i < mol.n_slots(); ++i) {
    if (!mol.is_real(i)) continue;
    std::vector<int> orders;
    int hetero = 0;
    for (int j = 0; j < mol.n_slots(); ++j) {
      if (mol.bond(i, j) == 0) continue;
      orders.push_back(mol.bond(i, j));
      const Element ne = mol.element(j);
      if (ne != Element::C && ne != Element::H) ++hetero;
    }
    std::sort(orders.begin(), orders.end());
    hetero = std::min(hetero, 2);
    classes[i] = table.classify(mol.element(i), orders, hetero, ring[i]);
  }
  return classes;
}

double crippen_logp(const MolecularGraph& mol, const ClassRuleTable& table) {
  const auto classes = classify_atoms(mol, table);
  double total = 0.0;
  for (int i = 0; i < mol.n_slots(); ++i) {
    if (classes[i] >= 0) total += table.contribution(classes[i]);
  }
  return total;
}

TeacherParams TeacherParams::make(uint64_t seed, double gain, double offset) {
  TeacherParams t;
  t.seed = seed;
  t.gain = gain;
  t.offset = offset;
  GcnConfig cfg;
  cfg.input_width = kPaletteSize + 1;
  cfg.embed = 32;
  cfg.n_conv = 3;
  cfg.fc = {};  // pooled linear head only
  cfg.dropout = 0.0;
  Rng rng(seed);
  t.net = init_gcn_params(cfg, rng);
  return t;
}

TeacherParams load_teacher(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open teacher file: " + path);
  nlohmann::json doc;
  in >> doc;
  return TeacherParams::make(doc.at("seed").get<uint64_t>(),
                             doc.at("gain").get<double>(),
                             doc.at("offset").get<double>());
}

void save_teacher(const std::string& path, const TeacherParams& teacher) {
  nlohmann::json doc{{"seed", teacher.seed},
                     {"gain", teacher.gain},
                     {"offset", teacher.offset}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write teacher file: " + path);
  out << doc.dump(2) << '\n';
}

double teacher_property_raw(const MolecularGraph& mol,
                            const TeacherParams& teacher) {
  auto [a, f] = exact_tensors(mol);
  return gcn_eval(teacher.net, a, f);
}

double teacher_property(const MolecularGraph& mol,
                        const TeacherParams& teacher) {
  return teacher.gain * teacher_property_raw(mol, teacher) + teacher.offset;
}

std::pair<double, double> calibrate_teacher(
    const TeacherParams& teacher, const std::vector<MolecularGraph>& mols,
    double lo, double hi) {
  require(mols.size() >= 2, "calibration needs molecules");
  std::vector<double> raw;
  raw.reserve(mols.size());
  for (const auto& m : mols) raw.push_back(teacher_property_raw(m, teacher));
  const double p1 = nearest_rank_percentile(raw, 1.0);
  const double p99 = nearest_rank_percentile(raw, 99.0);
  require(p99 > p1, "degenerate teacher output range");
  const double gain = (hi - lo) / (p99 - p1);
  return {gain, lo - gain * p1};
}

double nearest_rank_percentile(std::vector<double> values, double pct) {
  require(!values.empty(), "percentile of empty data");
  require(pct >= 0.0 && pct <= 100.0, "percentile out of range");
  std::sort(values.begin(), values.end());
  const int n = static_cast<int>(values.size());
  int rank = static_cast<int>(std::ceil(pct / 100.0 * n));
  rank = std::clamp(rank, 1, n);
  return values[rank - 1];
}

std::vector<double> percentile_targets(
    const std::vector<MoleculeRecord>& dataset, const std::string& property,
    const std::vector<double>& percentiles) {
  require(!dataset.empty(), "percentile_targets: empty dataset");
  std::vector<double> values;
  values.reserve(dataset.size());
  for (const auto& rec : dataset) {
    const auto it = rec.properties.find(property);
    if (it == rec.properties.end()) {
      throw std::invalid_argument("unknown property name: " + property);
    }
    values.push_back(it->second);
  }
  std::vector<double> out;
  out.reserve(percentiles.size());
  for (double p : percentiles)
    out.push_back(nearest_rank_percentile(values, p));
  return out;
}

}  // namespace didgen
