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

#include <filesystem>
#include <string>
#include <vector>

#include "fssti/backbone/backbone.hpp"
#include "fssti/ttis/ttis.hpp"

namespace fssti::training {

/// Every learnable tensor of the pipeline.
struct Model {
  backbone::Backbone backbone;
  ttis::TtisParams ttis;

  /// Backbone tensors ("backbone.<i>.bias/.weight") followed by
  /// "ttis.amplitude.mixing", "ttis.amplitude.shift", "ttis.phase.mixing",
  /// "ttis.phase.shift". Flags reflect the backbone's trainable scope; TTIs
  /// tensors are always trainable.
  std::vector<backbone::NamedParam> named_parameters();
};

/// Conv-stack backbone with C output channels and identity TTIs parameters.
Model initial_model(int channels, Rng& rng);
/// 1x1 projection backbone over external C-channel features.
Model initial_projection_model(int channels);

struct NamedTensor {
  std::string name;
  FeatureMap value;  // c x h x w payload; matrices are stored as rows x 1 x cols
};

/// Named tensors in a fixed order; the on-disk form is "FSTI", u32 version 1,
/// then per tensor a u32 name length, the UTF-8 name and an FTNS payload.
/// Payloads are 32-bit floats, so a written model is the f32 rounding of the
/// in-memory one.
struct Checkpoint {
  std::vector<NamedTensor> tensors;

  const FeatureMap& at(const std::string& name) const;
  bool operator==(const Checkpoint& other) const;
};

inline constexpr char kCheckpointMagic[4] = {'F', 'S', 'T', 'I'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

Checkpoint to_checkpoint(const Model& model);
/// Conv weights are stored as out x in x (k*k); stride and padding follow
/// from k (3: stride 2, pad 1; 1: stride 1, pad 0) and every layer but the
/// last applies ReLU.
Model from_checkpoint(const Checkpoint& ckpt);

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Round-trips the model through the 32-bit checkpoint representation.
Model quantize(const Model& model);

}  // namespace fssti::training
