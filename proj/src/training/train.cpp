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

#include "fssti/training/train.hpp"

#include <sstream>

#include "fssti/training/augment.hpp"

namespace fssti::training {

namespace {

// Independent generator streams of one run.
enum Stream : std::uint64_t { kEpisodes = 1, kTransform = 2, kAugment = 3 };

void apply_grads(Model& model, const std::map<std::string, Mat>& grads, OptimState& state) {
  std::vector<ParamUpdate> updates;
  for (auto& p : model.named_parameters()) {
    if (!p.trainable) continue;
    auto it = grads.find(p.name);
    if (it == grads.end()) throw std::logic_error("no gradient for trainable '" + p.name + "'");
    updates.push_back({p.name, p.value, &it->second});
  }
  sgd_step(std::move(updates), state);
}

void check_config(const TrainConfig& config) {
  if (config.k < 1) throw std::invalid_argument("K must be at least 1");
  if (config.iterations < 0) throw std::invalid_argument("iterations must be non-negative");
  if (!(config.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  config.pipeline.grid.validate();
}

}  // namespace

void check_determinants(const ttis::TtisParams& params, int iteration) {
  const auto check = [&](const Mat& m, const char* name) {
    const double d = determinant(m);
    if (!(d >= kMinDeterminant && d <= kMaxDeterminant)) {
      std::ostringstream msg;
      msg << "det(" << name << ") = " << d << " left [" << kMinDeterminant << ", "
          << kMaxDeterminant << "] after iteration " << iteration
          << "; the signed regularizer rewards shrinking determinants, consider reg_form "
             "\"absolute\"";
      throw TrainingDiverged(msg.str());
    }
  };
  check(params.amplitude.mixing, "M_amplitude");
  check(params.phase.mixing, "M_phase");
}

TrainLog train_source(const episodes::Dataset& dataset, Model& model, const TrainConfig& config,
                      const StepCallback& on_step) {
  check_config(config);
  const auto categories = dataset.categories(episodes::Domain::kSource);
  if (categories.empty()) throw std::invalid_argument("source dataset is empty");
  model.backbone.set_trainable(backbone::TrainableScope::kAll);

  const Rng root(config.seed);
  Rng episode_rng = root.split(kEpisodes);
  Rng transform_rng = root.split(kTransform);
  OptimState state{config.momentum, config.learning_rate, {}};
  TrainLog log;
  for (int it = 0; it < config.iterations; ++it) {
    const int cat = categories[episode_rng.uniform_index(categories.size())];
    const auto ep = episodes::sample_episode(dataset, cat, config.k, episode_rng);
    std::vector<LabeledImage> supports;
    for (const auto* s : ep.supports) supports.push_back({&s->image, &s->mask});
    const LabeledImage query{&ep.query->image, &ep.query->mask};
    const auto result = episode_loss(supports, query, model, config.pipeline, transform_rng);
    apply_grads(model, result.grads, state);
    check_determinants(model.ttis, it);
    log.steps.push_back(result.loss);
    if (on_step) on_step(it, result.loss);
  }
  return log;
}

TrainLog finetune_target(const episodes::FinetunePool& pool, Model& model,
                         const TrainConfig& config, episodes::AccessAudit* audit,
                         const StepCallback& on_step) {
  check_config(config);
  if (pool.k() != config.k)
    throw std::invalid_argument("pool holds " + std::to_string(pool.k()) +
                                " supports per category but K = " + std::to_string(config.k));
  const auto categories = pool.categories();
  model.backbone.set_trainable(backbone::TrainableScope::kLastLayerOnly);

  const Rng root(config.seed);
  Rng episode_rng = root.split(kEpisodes);
  Rng transform_rng = root.split(kTransform);
  Rng augment_rng = root.split(kAugment);
  OptimState state{config.momentum, config.learning_rate, {}};
  TrainLog log;
  for (int it = 0; it < config.iterations; ++it) {
    const int cat = categories[episode_rng.uniform_index(categories.size())];
    std::vector<const episodes::Sample*> shots;
    for (int k = 0; k < pool.k(); ++k)
      shots.push_back(&pool.support(cat, k, episodes::AccessPhase::kFinetune, audit));
    const auto* source = shots[episode_rng.uniform_index(shots.size())];
    const auto [q_image, q_mask] = augment_for_query(source->image, source->mask, augment_rng);

    std::vector<LabeledImage> supports;
    for (const auto* s : shots) supports.push_back({&s->image, &s->mask});
    const LabeledImage query{&q_image, &q_mask};
    const auto result = episode_loss(supports, query, model, config.pipeline, transform_rng);
    apply_grads(model, result.grads, state);
    check_determinants(model.ttis, it);
    log.steps.push_back(result.loss);
    if (on_step) on_step(it, result.loss);
  }
  model.backbone.set_trainable(backbone::TrainableScope::kAll);
  return log;
}

}  // namespace fssti::training
