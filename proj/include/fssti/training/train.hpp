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
#include <functional>
#include <stdexcept>
#include <vector>

#include "fssti/episodes/sampling.hpp"
#include "fssti/training/optim.hpp"
#include "fssti/training/pipeline.hpp"

namespace fssti::training {

inline constexpr int kDefaultSourceIterations = 2000;
inline constexpr int kDefaultFinetuneIterations = 100;
/// Training aborts when det(M) of either spectrum leaves this range.
inline constexpr double kMinDeterminant = 0.1;
inline constexpr double kMaxDeterminant = 10.0;

struct TrainConfig {
  PipelineConfig pipeline;
  int k = 1;
  int iterations = kDefaultSourceIterations;
  double learning_rate = kDefaultLrSource;
  double momentum = kDefaultMomentum;
  std::uint64_t seed = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainLog {
  std::vector<LossBreakdown> steps;
};

/// Called after every step with the iteration index and its loss.
using StepCallback = std::function<void(int, const LossBreakdown&)>;

/// Episodic source training: each step draws a source category uniformly, a
/// K-shot episode from it, and applies one SGD step to every trainable tensor
/// (scope All). Updates `model` in place.
TrainLog train_source(const episodes::Dataset& dataset, Model& model, const TrainConfig& config,
                      const StepCallback& on_step = {});

/// Target fine-tuning restricted to the pool: each step draws a pool
/// category, uses its K supports and a query synthesized from one of them.
/// Only the last backbone layer and the TTIs parameters change. Every read
/// goes through the pool accessor and is logged to `audit` if given.
TrainLog finetune_target(const episodes::FinetunePool& pool, Model& model,
                         const TrainConfig& config, episodes::AccessAudit* audit = nullptr,
                         const StepCallback& on_step = {});

/// Throws TrainingDiverged naming the offending matrix.
void check_determinants(const ttis::TtisParams& params, int iteration);

}  // namespace fssti::training
