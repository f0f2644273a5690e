// Copyright 2026 The fssti Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fssti/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fssti {

using nlohmann::json;

training::RegForm parse_reg_form(const std::string& name) {
  if (name == "signed") return training::RegForm::kSigned;
  if (name == "absolute") return training::RegForm::kAbsolute;
  throw ConfigError("reg_form must be \"signed\" or \"absolute\", got \"" + name + "\"");
}

void ExperimentConfig::validate() const {
  const auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (image_size < 8 || image_size % 8 != 0)
    fail("image_size must be a positive multiple of 8, got " + std::to_string(image_size));
  if (images_per_category < 2) fail("images_per_category must be at least 2");
  if (channels < 1) fail("channels must be positive");
  if (k < 1) fail("k must be at least 1");
  if (k >= images_per_category) fail("k must be smaller than images_per_category");
  if (n_intervals < 1) fail("n_intervals must be at least 1");
  if (!(h > 0.0)) fail("h must be positive");
  if (!(tau > 0.0)) fail("tau must be positive");
  if (alpha1 < 0.0 || alpha2 < 0.0) fail("alpha1 and alpha2 must be non-negative");
  if (!(lr_source > 0.0) || !(lr_finetune > 0.0)) fail("learning rates must be positive");
  if (momentum < 0.0 || momentum >= 1.0) fail("momentum must lie in [0, 1)");
  if (iterations_source < 0 || iterations_finetune < 0) fail("iterations must be non-negative");
  if (repeats < 1) fail("repeats must be at least 1");
  try {
    training::Variant::parse(variant);
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  parse_reg_form(reg_form);
  if (std_kind != "sample" && std_kind != "population")
    fail("std_kind must be \"sample\" or \"population\"");
}

training::PipelineConfig ExperimentConfig::pipeline() const {
  training::PipelineConfig p;
  p.grid = {n_intervals, h};
  p.temperature = tau;
  p.weights = {alpha1, alpha2};
  p.variant = training::Variant::parse(variant);
  p.reg_form = parse_reg_form(reg_form);
  return p;
}

training::TrainConfig ExperimentConfig::source_training() const {
  return {pipeline(), k, iterations_source, lr_source, momentum, seed};
}

training::TrainConfig ExperimentConfig::finetuning() const {
  return {pipeline(), k, iterations_finetune, lr_finetune, momentum, seed};
}

eval::ProtocolConfig ExperimentConfig::protocol(int threads) const {
  eval::ProtocolConfig p;
  p.finetune = finetuning();
  p.seeds = eval::default_seeds(seed * 1000 + 1, repeats);
  p.std_kind = std_kind == "population" ? eval::StdKind::kPopulation : eval::StdKind::kSample;
  p.threads = threads;
  return p;
}

episodes::SynthSpec ExperimentConfig::synth_spec() const {
  episodes::SynthSpec s;
  s.image_size = image_size;
  s.images_per_category = images_per_category;
  s.seed = seed;
  return s;
}

namespace {

#define FSSTI_CONFIG_FIELDS(X)                                                              \
  X(seed) X(image_size) X(images_per_category) X(channels) X(k) X(n_intervals) X(h) X(tau) \
  X(alpha1) X(alpha2) X(lr_source) X(lr_finetune) X(momentum) X(iterations_source)         \
  X(iterations_finetune) X(repeats) X(variant) X(reg_form) X(std_kind) X(data)            \
  X(checkpoint) X(out)

std::pair<int, int> line_col(const std::string& text, std::size_t byte) {
  int line = 1;
  int col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

std::string ExperimentConfig::to_json() const {
  json j;
#define FSSTI_TO_JSON(name) j[#name] = name;
  FSSTI_CONFIG_FIELDS(FSSTI_TO_JSON)
#undef FSSTI_TO_JSON
  return j.dump();
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // byte is one past the offending character.
    const auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ConfigError("config parse error at line " + std::to_string(line) + ", column " +
                      std::to_string(col) + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    try {
#define FSSTI_FROM_JSON(name)                       \
  if (key == #name) {                               \
    base.name = value.get<decltype(base.name)>();   \
    known = true;                                   \
  }
      FSSTI_CONFIG_FIELDS(FSSTI_FROM_JSON)
#undef FSSTI_FROM_JSON
    } catch (const json::exception& e) {
      throw ConfigError("config key \"" + key + "\" has the wrong type: " + e.what());
    }
    if (!known) throw ConfigError("unknown config key \"" + key + "\"");
  }
  base.validate();
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace fssti
