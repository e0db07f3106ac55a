// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#include "didgen/report.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "didgen/fingerprint.hpp"
#include "didgen/record.hpp"

namespace didgen {

using nlohmann::json;

Oracle teacher_oracle(const TeacherParams& teacher) {
  return {"gap",
          [teacher](const MolecularGraph& m) {
            return teacher_property(m, teacher);
          }};
}

Oracle logp_oracle(const ClassRuleTable& table) {
  return {"logp",
          [&table](const MolecularGraph& m) {
            return crippen_logp(m, table);
          }};
}

RunReport build_report(const std::string& task, const TargetSpec& target,
                       const std::vector<MolecularGraph>& mols,
                       const Oracle& oracle, int n_requested, int n_attempted,
                       const std::string& config_hash) {
  RunReport rep;
  rep.task = task;
  rep.target = target.describe();
  rep.n_requested = n_requested;
  rep.n_attempted = n_attempted;
  rep.n_emitted = static_cast<int>(mols.size());
  rep.proxy_hit_rate =
      n_attempted > 0 ? static_cast<double>(rep.n_emitted) / n_attempted : 0.0;
  rep.config_hash = config_hash;

  if (!mols.empty()) {
    double mae = 0, within = 0, in_target = 0;
    const double center = target.center();
    std::set<uint64_t> keys;
    for (const auto& m : mols) {
      const double o = oracle.eval(m);
      if (target.kind == TargetSpec::Kind::Point) {
        mae += std::abs(o - target.value);
      } else {
        mae += std::max({0.0, target.lo - o, o - target.hi});
      }
      if (std::abs(o - center) <= 0.5) within += 1.0;
      if (target.met(o)) in_target += 1.0;
      keys.insert(structure_key(m));
    }
    rep.oracle_mae = mae / mols.size();
    rep.within_half = within / mols.size();
    rep.in_target_rate = in_target / mols.size();
    rep.unique_count = static_cast<int>(keys.size());
    if (mols.size() >= 2) rep.diversity = diversity(mols);
  }
  return rep;
}

void write_report(const std::string& path, const RunReport& rep) {
  json doc{{"task", rep.task},
           {"target", rep.target},
           {"n_requested", rep.n_requested},
           {"n_attempted", rep.n_attempted},
           {"n_emitted", rep.n_emitted},
           {"proxy_hit_rate", rep.proxy_hit_rate},
           {"oracle_mae", rep.oracle_mae},
           {"within_half", rep.within_half},
           {"in_target_rate", rep.in_target_rate},
           {"diversity", rep.diversity},
           {"unique_count", rep.unique_count},
           {"config_hash", rep.config_hash}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write report: " + path);
  out << doc.dump(2) << '\n';
}

RunReport read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report: " + path);
  json doc;
  in >> doc;
  RunReport rep;
  rep.task = doc.at("task").get<std::string>();
  rep.target = doc.at("target").get<std::string>();
  rep.n_requested = doc.at("n_requested").get<int>();
  rep.n_attempted = doc.at("n_attempted").get<int>();
  rep.n_emitted = doc.at("n_emitted").get<int>();
  rep.proxy_hit_rate = doc.at("proxy_hit_rate").get<double>();
  rep.oracle_mae = doc.at("oracle_mae").get<double>();
  rep.within_half = doc.at("within_half").get<double>();
  rep.in_target_rate = doc.at("in_target_rate").get<double>();
  rep.diversity = doc.at("diversity").get<double>();
  rep.unique_count = doc.at("unique_count").get<int>();
  rep.config_hash = doc.at("config_hash").get<std::string>();
  return rep;
}

std::string report_table(const RunReport& rep) {
  std::ostringstream os;
  os << "task            " << rep.task << "\n"
     << "target          " << rep.target << "\n"
     << "requested       " << rep.n_requested << "\n"
     << "attempted       " << rep.n_attempted << "\n"
     << "emitted         " << rep.n_emitted << "\n"
     << "proxy hit rate  " << rep.proxy_hit_rate << "\n"
     << "oracle MAE      " << rep.oracle_mae << "\n"
     << "within +-0.5    " << rep.within_half << "\n"
     << "in-target rate  " << rep.in_target_rate << "\n";
  if (rep.diversity >= 0) {
    os << "diversity       " << rep.diversity << "\n";
  } else {
    os << "diversity       (undefined: fewer than 2 molecules)\n";
  }
  os << "unique          " << rep.unique_count << "\n"
     << "config hash     " << rep.config_hash << "\n";
  if (rep.wall_seconds > 0) {
    os << "wall time       " << rep.wall_seconds << " s\n";
  }
  return os.str();
}

}  // namespace didgen
