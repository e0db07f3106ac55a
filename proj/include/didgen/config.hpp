// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include <json.hpp>

#include "didgen/gcn.hpp"
#include "didgen/crippennet.hpp"
#include "didgen/invert.hpp"
#include "didgen/molgraph.hpp"
#include "didgen/train.hpp"

namespace didgen {

/// Fully-resolved configuration document. Presets ("desk", "paper") provide
/// the complete key set; user files overlay onto a preset and unknown keys
/// are rejected. Every run logs hash() of the resolved document.
class Config {
 public:
  static Config preset(const std::string& name);
  /// Preset (from the file's "preset" key or `fallback_preset`) overlaid
  /// with the file's keys.
  static Config load(const std::string& path,
                     const std::string& fallback_preset = "desk");

  const nlohmann::json& doc() const { return doc_; }
  std::string hash() const;

  int n_slots() const;
  GraphBuildParams build_params() const;
  SamplerConfig sampler_config() const;
  GcnConfig regressor_arch() const;
  CrippenNetConfig classifier_arch() const;
  TrainConfig train_config(const std::string& task) const;
  GenConfig gen_config() const;
  TeacherParams teacher() const;
  std::string rules_path() const;

  /// DIDGEN_SEED, when set, overrides every seed in the document.
  void apply_seed_override();
  void set(const std::string& pointer, const nlohmann::json& value);

 private:
  nlohmann::json doc_;
};

uint64_t fnv1a_hash(const std::string& text);
std::string hash_hex(uint64_t h);

}  // namespace didgen
