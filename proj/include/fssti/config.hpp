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

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "fssti/episodes/synth.hpp"
#include "fssti/eval/protocol.hpp"
#include "fssti/training/train.hpp"

namespace fssti {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat experiment configuration. JSON keys are the field names; command-line
/// flags use the same names with dashes.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  int image_size = 64;
  int images_per_category = 40;
  int channels = 32;
  int k = 1;
  int n_intervals = 10;
  double h = 0.01;
  double tau = training::kDefaultTemperature;
  double alpha1 = 0.5;
  double alpha2 = 0.5;
  double lr_source = training::kDefaultLrSource;
  double lr_finetune = training::kDefaultLrFinetune;
  double momentum = training::kDefaultMomentum;
  int iterations_source = training::kDefaultSourceIterations;
  int iterations_finetune = training::kDefaultFinetuneIterations;
  int repeats = 20;
  std::string variant = "full";
  std::string reg_form = "absolute";  // "signed" or "absolute"
  std::string std_kind = "sample";    // "sample" or "population"
  std::string data;                   // dataset directory
  std::string checkpoint;
  std::string out;

  /// Throws ConfigError describing the first invalid field.
  void validate() const;

  training::PipelineConfig pipeline() const;
  training::TrainConfig source_training() const;
  training::TrainConfig finetuning() const;
  eval::ProtocolConfig protocol(int threads) const;
  episodes::SynthSpec synth_spec() const;

  std::string to_json() const;
};

/// Overlays keys from JSON text onto `base`. Unknown keys and type mismatches
/// are errors; parse errors report line and column.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

training::RegForm parse_reg_form(const std::string& name);

}  // namespace fssti
