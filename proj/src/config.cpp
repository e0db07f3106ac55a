// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#include "didgen/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace didgen {

using nlohmann::json;

namespace {

#ifndef DIDGEN_DATA_DIR
#define DIDGEN_DATA_DIR ""
#endif

json desk_preset() {
  return json{
      {"preset", "desk"},
      {"n_slots", 16},
      {"graphbuild",
       {{"a_round", 0.1},
        {"a_max", 0.1},
        {"b_max", 0.05},
        {"bell",
         {{"c0", 1.0}, {"c1", 0.0}, {"c2", 0.5}, {"sigma", 0.35}}}}},
      {"sampler",
       {{"n_atoms_max", 16},
        {"max_heavy", 7},
        {"extra_edge_prob", 0.55},
        {"extra_edge_tries", 5},
        {"weights",
         {{"C", 0.60}, {"N", 0.16}, {"O", 0.16}, {"F", 0.08}}}}},
      {"oracle",
       {{"rules_path", ""},
        {"teacher",
         {{"seed", 42},
          {"gain", 8.5465223446622023},
          {"offset", -43.624044201933721}}}}},
      {"regressor",
       {{"embed", 48},
        {"n_conv", 3},
        {"fc", {48, 32}},
        {"dropout", 0.1},
        {"bn_momentum", 0.1}}},
      {"classifier", {{"n_hops", 4}, {"head_hidden", 100}}},
      {"train",
       {{"epochs", 60},
        {"batch", 200},
        {"lr", 1e-3},
        {"weight_decay", 1e-6},
        {"noise_sigma", 0.05},
        {"split", 0.8},
        {"seed", 1234},
        {"eval_every", 5},
        {"classifier",
         {{"epochs", 30},
          {"batches_per_epoch", 50},
          {"atoms_per_batch", 192},
          {"lr", 3e-3},
          {"alpha", 2.0},
          {"epsilon", 1e-6}}}}},
      {"invert",
       {{"lambda_l", 1.0},
        {"lambda_s", 1.0},
        {"lambda_c", 0.1},
        {"lr", 0.05},
        {"max_steps", 600},
        {"restart_noise", 0.05},
        {"stop_margin", 0.0},
        {"init", "random"},
        {"masking", true},
        {"seed", 99},
        {"attempt_factor", 10},
        {"composition",
         {{"H", 0.450139},
          {"C", 0.334061},
          {"N", 0.086383},
          {"O", 0.088046},
          {"F", 0.041372}}}}},
  };
}

// The article-scale hyperparameters, kept runnable for anyone attaching a
// larger dataset later.
json paper_preset() {
  json p = desk_preset();
  p["preset"] = "paper";
  p["n_slots"] = 25;
  p["sampler"]["n_atoms_max"] = 25;
  p["sampler"]["max_heavy"] = 9;
  p["regressor"] = json{{"embed", 256},
                        {"n_conv", 6},
                        {"fc", {256, 256, 128}},
                        {"dropout", 0.1},
                        {"bn_momentum", 0.1}};
  p["train"]["epochs"] = 1000;
  p["train"]["batch"] = 1000;
  p["train"]["classifier"]["epochs"] = 1000;
  return p;
}

void check_known_keys(const json& user, const json& schema,
                      const std::string& prefix) {
  for (const auto& [key, value] : user.items()) {
    if (!schema.contains(key)) {
      throw std::invalid_argument("unknown config key: " + prefix + key);
    }
    if (value.is_object() && schema.at(key).is_object()) {
      check_known_keys(value, schema.at(key), prefix + key + ".");
    }
  }
}

void deep_merge(json& base, const json& overlay) {
  for (const auto& [key, value] : overlay.items()) {
    if (value.is_object() && base.contains(key) && base[key].is_object()) {
      deep_merge(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

}  // namespace

Config Config::preset(const std::string& name) {
  Config c;
  if (name == "desk") {
    c.doc_ = desk_preset();
  } else if (name == "paper") {
    c.doc_ = paper_preset();
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  c.apply_seed_override();
  return c;
}

Config Config::load(const std::string& path,
                    const std::string& fallback_preset) {
  if (path.empty()) return preset(fallback_preset);
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  json user;
  try {
    in >> user;
  } catch (const json::parse_error& e) {
    throw ParseError("config parse error in " + path + ": " + e.what());
  }
  const std::string preset_name =
      user.value("preset", fallback_preset);
  Config c = preset(preset_name);
  check_known_keys(user, c.doc_, "");
  deep_merge(c.doc_, user);
  c.apply_seed_override();
  return c;
}

void Config::apply_seed_override() {
  if (const char* env = std::getenv("DIDGEN_SEED")) {
    const uint64_t seed = std::stoull(env);
    doc_["train"]["seed"] = seed;
    doc_["invert"]["seed"] = seed;
  }
}

void Config::set(const std::string& pointer, const json& value) {
  doc_[json::json_pointer(pointer)] = value;
}

uint64_t fnv1a_hash(const std::string& text) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(uint64_t h) {
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

std::string Config::hash() const { return hash_hex(fnv1a_hash(doc_.dump())); }

int Config::n_slots() const { return doc_.at("n_slots").get<int>(); }

GraphBuildParams Config::build_params() const {
  const auto& g = doc_.at("graphbuild");
  GraphBuildParams p;
  p.a_round = g.at("a_round").get<double>();
  p.a_max = g.at("a_max").get<double>();
  p.b_max = g.at("b_max").get<double>();
  const auto& b = g.at("bell");
  p.bell = BellParams{b.at("c0").get<double>(), b.at("c1").get<double>(),
                      b.at("c2").get<double>(), b.at("sigma").get<double>()};
  p.bell.check();
  return p;
}

SamplerConfig Config::sampler_config() const {
  const auto& s = doc_.at("sampler");
  SamplerConfig c;
  c.n_atoms_max = s.at("n_atoms_max").get<int>();
  c.max_heavy = s.at("max_heavy").get<int>();
  c.extra_edge_prob = s.at("extra_edge_prob").get<double>();
  c.extra_edge_tries = s.at("extra_edge_tries").get<int>();
  const auto& w = s.at("weights");
  c.heavy_weights = {w.at("C").get<double>(), w.at("N").get<double>(),
                     w.at("O").get<double>(), w.at("F").get<double>()};
  return c;
}

GcnConfig Config::regressor_arch() const {
  const auto& r = doc_.at("regressor");
  GcnConfig c;
  c.input_width = kPaletteSize + 1;
  c.embed = r.at("embed").get<int>();
  c.n_conv = r.at("n_conv").get<int>();
  c.fc = r.at("fc").get<std::vector<int>>();
  c.dropout = r.at("dropout").get<double>();
  c.bn_momentum = r.at("bn_momentum").get<double>();
  return c;
}

CrippenNetConfig Config::classifier_arch() const {
  const auto& r = doc_.at("classifier");
  CrippenNetConfig c;
  c.n_hops = r.at("n_hops").get<int>();
  c.head_hidden = r.at("head_hidden").get<int>();
  return c;
}

TrainConfig Config::train_config(const std::string& task) const {
  const auto& t = doc_.at("train");
  TrainConfig c;
  c.epochs = t.at("epochs").get<int>();
  c.batch = t.at("batch").get<int>();
  c.lr = t.at("lr").get<double>();
  c.weight_decay = t.at("weight_decay").get<double>();
  c.noise_sigma = t.at("noise_sigma").get<double>();
  c.split = t.at("split").get<double>();
  c.seed = t.at("seed").get<uint64_t>();
  c.eval_every = t.at("eval_every").get<int>();
  if (task == "logp") {
    const auto& cl = t.at("classifier");
    c.epochs = cl.at("epochs").get<int>();
    c.cls_batches_per_epoch = cl.at("batches_per_epoch").get<int>();
    c.cls_atoms_per_batch = cl.at("atoms_per_batch").get<int>();
    c.lr = cl.at("lr").get<double>();
    c.cls_alpha = cl.at("alpha").get<double>();
    c.cls_epsilon = cl.at("epsilon").get<double>();
  }
  return c;
}

GenConfig Config::gen_config() const {
  const auto& v = doc_.at("invert");
  GenConfig c;
  c.lambda_l = v.at("lambda_l").get<double>();
  c.lambda_s = v.at("lambda_s").get<double>();
  c.lambda_c = v.at("lambda_c").get<double>();
  c.n_slots = n_slots();
  c.max_steps = v.at("max_steps").get<int>();
  c.lr = v.at("lr").get<double>();
  c.restart_noise = v.at("restart_noise").get<double>();
  c.stop_margin = v.at("stop_margin").get<double>();
  const std::string init = v.at("init").get<std::string>();
  if (init == "random") {
    c.init = GenConfig::Init::Random;
  } else if (init == "from-dataset") {
    c.init = GenConfig::Init::FromMolecule;
  } else {
    throw std::invalid_argument("invert.init must be 'random' or "
                                "'from-dataset'");
  }
  c.masking = v.at("masking").get<bool>();
  c.seed = v.at("seed").get<uint64_t>();
  c.attempt_factor = v.at("attempt_factor").get<int>();
  const auto& comp = v.at("composition");
  c.composition = Vector(kRealElements);
  for (int e = 0; e < kRealElements; ++e) {
    c.composition[e] = comp.at(kElements[e].symbol).get<double>();
  }
  const double s = c.composition.sum();
  require(s > 0, "composition target must have positive mass");
  c.composition /= s;
  c.build = build_params();
  c.check();
  return c;
}

TeacherParams Config::teacher() const {
  const auto& t = doc_.at("oracle").at("teacher");
  return TeacherParams::make(t.at("seed").get<uint64_t>(),
                             t.at("gain").get<double>(),
                             t.at("offset").get<double>());
}

std::string Config::rules_path() const {
  std::string path = doc_.at("oracle").at("rules_path").get<std::string>();
  if (path.empty()) {
    path = std::string(DIDGEN_DATA_DIR) + "/crippen_rules.txt";
  }
  return path;
}

}  // namespace didgen
