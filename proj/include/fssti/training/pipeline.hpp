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

#include <map>
#include <span>
#include <string>

#include "fssti/autodiff/tape.hpp"
#include "fssti/fewshot/fewshot.hpp"
#include "fssti/training/checkpoint.hpp"
#include "fssti/training/losses.hpp"

namespace fssti::training {

/// Component switches. Each flag removes one piece of the method.
struct Variant {
  bool ode = true;       // false: one step over the whole horizon
  bool spectral = true;  // false: evolve raw feature planes
  bool perturb = true;   // false: clean forcing during training as well
  bool reg = true;       // false: drop the parameter regularizer
  bool ds_loss = true;   // false: drop the domain-specific query loss

  /// "full", "no-ode", "no-fft", "no-rsp", "no-reg", "no-dsloss".
  static Variant parse(const std::string& name);
  std::string name() const;
  /// Row label of the ablation table.
  std::string label() const;
  bool operator==(const Variant&) const = default;
};

struct PipelineConfig {
  ttis::TimeGrid grid;
  double temperature = kDefaultTemperature;
  fewshot::CombineWeights weights;
  Variant variant;
  RegForm reg_form = RegForm::kSigned;

  ttis::TtisOptions ttis_options(bool training) const;
};

struct LossBreakdown {
  double ds = 0.0;    // domain-specific query loss
  double da_q = 0.0;  // domain-agnostic query losses (support-only + combined)
  double da_s = 0.0;  // support self-prediction losses, summed over shots
  double reg = 0.0;   // parameter regularizer
  double total = 0.0;
};

/// An image and its mask at image resolution.
struct LabeledImage {
  const FeatureMap* image;
  const BinaryMask* mask;
};

struct LossResult {
  LossBreakdown loss;
  /// Gradients of `loss.total` for every trainable tensor, keyed as in
  /// Model::named_parameters().
  std::map<std::string, Mat> grads;
};

/// Full training objective of one episode. Draws one perturbation factor per
/// transformed image from `rng` (when the variant perturbs). Components removed
/// by the variant are reported as 0 and excluded from the total.
LossResult episode_loss(std::span<const LabeledImage> supports, const LabeledImage& query,
                        const Model& model, const PipelineConfig& config, Rng& rng);

/// Backbone followed by the clean transform.
FeatureMap domain_agnostic(const Model& model, const FeatureMap& image,
                           const PipelineConfig& config);

/// Test-time segmentation at feature resolution.
fewshot::SegmentationResult predict(const Model& model, std::span<const LabeledImage> supports,
                                    const FeatureMap& query_image, const PipelineConfig& config);

// Tape ops shared with the gradient checks.
namespace ops {

struct TtisVars {
  ad::Var amplitude_mixing, amplitude_shift, phase_mixing, phase_shift;
};
TtisVars bind(ad::Tape& tape, const ttis::TtisParams& params);

ad::Var transform(ad::Tape& tape, ad::Var features, int h, int w, const TtisVars& params,
                  const ttis::TtisOptions& options, Rng* rng);
ad::Var masked_mean(ad::Tape& tape, ad::Var features, const RowVec& weights);
ad::Var broadcast_columns(ad::Tape& tape, ad::Var column, Eigen::Index n);
ad::Var cosine(ad::Tape& tape, ad::Var prototypes, ad::Var query);
ad::Var adaptive_background(ad::Tape& tape, ad::Var query, std::vector<int> background);
ad::Var bce(ad::Tape& tape, ad::Var fg, ad::Var bg, const RowVec& mask, double tau);
ad::Var reg(ad::Tape& tape, const TtisVars& params, RegForm form);

}  // namespace ops

}  // namespace fssti::training
