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

#include "fssti/training/pipeline.hpp"

#include <memory>
#include <stdexcept>

namespace fssti::training {

Variant Variant::parse(const std::string& name) {
  Variant v;
  if (name == "full") return v;
  if (name == "no-ode") v.ode = false;
  else if (name == "no-fft") v.spectral = false;
  else if (name == "no-rsp") v.perturb = false;
  else if (name == "no-reg") v.reg = false;
  else if (name == "no-dsloss") v.ds_loss = false;
  else throw std::invalid_argument("unknown variant '" + name + "'");
  return v;
}

std::string Variant::name() const {
  std::string out;
  const auto add = [&out](bool on, const char* tag) {
    if (!on) out += out.empty() ? tag : std::string("+") + tag;
  };
  add(ode, "no-ode");
  add(spectral, "no-fft");
  add(perturb, "no-rsp");
  add(reg, "no-reg");
  add(ds_loss, "no-dsloss");
  return out.empty() ? "full" : out;
}

std::string Variant::label() const {
  std::string out = "FSS-TIs";
  if (!ode) out += "-ODE";
  if (!spectral) out += "-FFT";
  if (!perturb) out += "-RSP";
  if (!reg) out += "-LR";
  if (!ds_loss) out += "-Lds";
  return out;
}

ttis::TtisOptions PipelineConfig::ttis_options(bool training) const {
  ttis::TtisOptions o;
  o.grid = grid;
  o.mode = training && variant.perturb ? ttis::TtisMode::kTrainPerturbed : ttis::TtisMode::kEvalClean;
  o.spectral = variant.spectral;
  o.single_step = !variant.ode;
  return o;
}

namespace ops {

using ad::Tape;
using ad::Var;

TtisVars bind(Tape& tape, const ttis::TtisParams& params) {
  return {tape.leaf(params.amplitude.mixing), tape.leaf(params.amplitude.shift),
          tape.leaf(params.phase.mixing), tape.leaf(params.phase.shift)};
}

namespace {

ttis::TtisParams read_params(const Tape& t, const TtisVars& p) {
  return {{t.value(p.amplitude_mixing), t.value(p.amplitude_shift)},
          {t.value(p.phase_mixing), t.value(p.phase_shift)}};
}

}  // namespace

Var transform(Tape& tape, Var features, int h, int w, const TtisVars& params,
              const ttis::TtisOptions& options, Rng* rng) {
  auto trace = std::make_shared<ttis::TransformTrace>(ttis::transform_traced(
      FeatureMap(h, w, tape.value(features)), read_params(tape, params), options, rng));
  Mat out = trace->output.planes();
  return tape.record(
      std::move(out),
      {features, params.amplitude_mixing, params.amplitude_shift, params.phase_mixing,
       params.phase_shift},
      [features, params, trace](Tape& t, const Mat& g) {
        const auto grads = ttis::transform_vjp(*trace, read_params(t, params), g);
        t.accumulate(features, grads.input);
        t.accumulate(params.amplitude_mixing, grads.params.amplitude.mixing);
        t.accumulate(params.amplitude_shift, grads.params.amplitude.shift);
        t.accumulate(params.phase_mixing, grads.params.phase.mixing);
        t.accumulate(params.phase_shift, grads.params.phase.shift);
      });
}

Var masked_mean(Tape& tape, Var features, const RowVec& weights) {
  Mat out = fewshot::kernels::masked_mean(tape.value(features), weights);
  const auto channels = tape.value(features).rows();
  return tape.record(std::move(out), {features}, [features, weights, channels](Tape& t, const Mat& g) {
    t.accumulate(features, fewshot::kernels::masked_mean_vjp(weights, g.col(0), channels));
  });
}

Var broadcast_columns(Tape& tape, Var column, Eigen::Index n) {
  Mat out = tape.value(column).replicate(1, n);
  return tape.record(std::move(out), {column},
                     [column](Tape& t, const Mat& g) { t.accumulate(column, g.rowwise().sum()); });
}

Var cosine(Tape& tape, Var prototypes, Var query) {
  Mat out = fewshot::kernels::cosine_columns(tape.value(prototypes), tape.value(query));
  return tape.record(std::move(out), {prototypes, query}, [prototypes, query](Tape& t, const Mat& g) {
    const auto grads =
        fewshot::kernels::cosine_columns_vjp(t.value(prototypes), t.value(query), g.row(0));
    t.accumulate(prototypes, grads.p);
    t.accumulate(query, grads.q);
  });
}

Var adaptive_background(Tape& tape, Var query, std::vector<int> background) {
  Mat out = fewshot::kernels::adaptive_background(tape.value(query), background);
  return tape.record(std::move(out), {query},
                     [query, background = std::move(background)](Tape& t, const Mat& g) {
                       t.accumulate(query, fewshot::kernels::adaptive_background_vjp(
                                               t.value(query), background, g));
                     });
}

Var bce(Tape& tape, Var fg, Var bg, const RowVec& mask, double tau) {
  Mat out(1, 1);
  out(0, 0) = kernels::bce(tape.value(fg).row(0), tape.value(bg).row(0), mask, tau);
  return tape.record(std::move(out), {fg, bg}, [fg, bg, mask, tau](Tape& t, const Mat& g) {
    const auto grads = kernels::bce_vjp(t.value(fg).row(0), t.value(bg).row(0), mask, tau, g(0, 0));
    t.accumulate(fg, grads.fg);
    t.accumulate(bg, grads.bg);
  });
}

Var reg(Tape& tape, const TtisVars& params, RegForm form) {
  const auto p = read_params(tape, params);
  Mat out(1, 1);
  out(0, 0) = reg_loss(p, form);
  return tape.record(std::move(out),
                     {params.amplitude_mixing, params.amplitude_shift, params.phase_mixing,
                      params.phase_shift},
                     [params, p, form](Tape& t, const Mat& g) {
                       const auto grads = reg_loss_grad(p, form);
                       t.accumulate(params.amplitude_mixing, g(0, 0) * grads.amplitude.mixing);
                       t.accumulate(params.amplitude_shift, g(0, 0) * grads.amplitude.shift);
                       t.accumulate(params.phase_mixing, g(0, 0) * grads.phase.mixing);
                       t.accumulate(params.phase_shift, g(0, 0) * grads.phase.shift);
                     });
}

}  // namespace ops

namespace {

using ad::Tape;
using ad::Var;

struct FeatureNode {
  Var planes;
  int height;
  int width;
  RowVec fg;  // mask weights at feature resolution
  RowVec bg;
};

Var mean_of(Tape& t, const std::vector<Var>& items) {
  Var acc = items.front();
  for (std::size_t i = 1; i < items.size(); ++i) acc = ad::add(t, acc, items[i]);
  return items.size() == 1 ? acc : ad::scale(t, acc, 1.0 / static_cast<double>(items.size()));
}

BinaryMask binarize_values(const Mat& fg, const Mat& bg, int h, int w) {
  fewshot::PredictionPair p{fg.row(0), bg.row(0), h, w};
  return fewshot::binarize(p);
}

struct PredictionVars {
  Var fg;
  Var bg;
};

struct SegmentationVars {
  PredictionVars support_only;  // averaged support prototypes
  PredictionVars combined;
};

// Mirrors fewshot::segment_query on the tape. Binarized masks are constants.
SegmentationVars segment(Tape& t, const std::vector<const FeatureNode*>& shots,
                         const FeatureNode& query, const fewshot::CombineWeights& w) {
  const Eigen::Index n = t.value(query.planes).cols();
  std::vector<Var> fg, bg, self_fg, self_bg;
  for (const auto* shot : shots) {
    fg.push_back(ops::masked_mean(t, shot->planes, shot->fg));
    bg.push_back(ops::masked_mean(t, shot->planes, shot->bg));
    const Mat fg_sim = fewshot::kernels::cosine_columns(t.value(fg.back()), t.value(query.planes));
    const Mat bg_sim = fewshot::kernels::cosine_columns(t.value(bg.back()), t.value(query.planes));
    const auto initial = binarize_values(fg_sim, bg_sim, query.height, query.width);
    self_fg.push_back(initial.count() == 0
                          ? fg.back()
                          : ops::masked_mean(t, query.planes, initial.as_weights()));
    auto idx = fewshot::background_indices(initial);
    self_bg.push_back(idx.empty() ? ops::broadcast_columns(t, bg.back(), n)
                                  : ops::adaptive_background(t, query.planes, std::move(idx)));
  }
  const Var support_fg = mean_of(t, fg);
  const Var support_bg = mean_of(t, bg);
  const Var combined_fg = ad::add(t, ad::scale(t, support_fg, w.support),
                                  ad::scale(t, mean_of(t, self_fg), w.self));
  const Var combined_bg = ad::add(t, ad::scale(t, ops::broadcast_columns(t, support_bg, n), w.support),
                                  ad::scale(t, mean_of(t, self_bg), w.self));
  SegmentationVars out;
  out.support_only = {ops::cosine(t, support_fg, query.planes), ops::cosine(t, support_bg, query.planes)};
  out.combined = {ops::cosine(t, combined_fg, query.planes), ops::cosine(t, combined_bg, query.planes)};
  return out;
}

BinaryMask feature_mask(const BinaryMask& m, int factor, int h, int w) {
  auto small = m.downsample(factor);
  if (small.height() != h || small.width() != w)
    throw ShapeError("mask does not match the feature resolution");
  return small;
}

}  // namespace

LossResult episode_loss(std::span<const LabeledImage> supports, const LabeledImage& query,
                        const Model& model, const PipelineConfig& config, Rng& rng) {
  if (supports.empty()) throw std::invalid_argument("episode needs at least one support");
  Tape t;
  const auto bb = model.backbone.bind(t);
  const auto tv = ops::bind(t, model.ttis);
  const auto options = config.ttis_options(/*training=*/true);
  const int factor = model.backbone.downsample_factor();

  const auto encode = [&](const LabeledImage& item, FeatureNode& ds, FeatureNode& da) {
    ds.planes = model.backbone.forward(t, bb, *item.image);
    ds.height = item.image->height() / factor;
    ds.width = item.image->width() / factor;
    const auto m = feature_mask(*item.mask, factor, ds.height, ds.width);
    ds.fg = m.as_weights();
    ds.bg = m.complement().as_weights();
    da = ds;
    da.planes = ops::transform(t, ds.planes, ds.height, ds.width, tv, options, &rng);
  };

  std::vector<FeatureNode> s_ds(supports.size()), s_da(supports.size());
  for (std::size_t k = 0; k < supports.size(); ++k) encode(supports[k], s_ds[k], s_da[k]);
  FeatureNode q_ds, q_da;
  encode(query, q_ds, q_da);

  const double tau = config.temperature;
  LossBreakdown loss;
  std::vector<Var> terms;

  if (config.variant.ds_loss) {
    std::vector<Var> fg, bg;
    for (const auto& s : s_ds) {
      fg.push_back(ops::masked_mean(t, s.planes, s.fg));
      bg.push_back(ops::masked_mean(t, s.planes, s.bg));
    }
    const Var l = ops::bce(t, ops::cosine(t, mean_of(t, fg), q_ds.planes),
                           ops::cosine(t, mean_of(t, bg), q_ds.planes), q_ds.fg, tau);
    loss.ds = t.value(l)(0, 0);
    terms.push_back(l);
  }

  {
    std::vector<const FeatureNode*> shots;
    for (const auto& s : s_da) shots.push_back(&s);
    const auto seg = segment(t, shots, q_da, config.weights);
    const Var p = ops::bce(t, seg.support_only.fg, seg.support_only.bg, q_da.fg, tau);
    const Var p_hat = ops::bce(t, seg.combined.fg, seg.combined.bg, q_da.fg, tau);
    const Var l = ad::add(t, p, p_hat);
    loss.da_q = t.value(l)(0, 0);
    terms.push_back(l);
  }

  {
    std::vector<Var> per_shot;
    for (const auto& s : s_da) {
      const auto seg = segment(t, {&s}, s, config.weights);
      per_shot.push_back(ops::bce(t, seg.combined.fg, seg.combined.bg, s.fg, tau));
    }
    Var l = per_shot.front();
    for (std::size_t k = 1; k < per_shot.size(); ++k) l = ad::add(t, l, per_shot[k]);
    loss.da_s = t.value(l)(0, 0);
    terms.push_back(l);
  }

  if (config.variant.reg) {
    const Var l = ops::reg(t, tv, config.reg_form);
    loss.reg = t.value(l)(0, 0);
    terms.push_back(l);
  }

  Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(t, total, terms[i]);
  loss.total = loss.ds + loss.da_q + loss.da_s + loss.reg;
  t.backward(total);

  LossResult result{loss, {}};
  const auto& layers = model.backbone.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!model.backbone.layer_trainable(i)) continue;
    const std::string prefix = "backbone." + std::to_string(i);
    result.grads[prefix + ".bias"] = t.grad(bb.biases[i]);
    result.grads[prefix + ".weight"] = t.grad(bb.weights[i]);
  }
  result.grads["ttis.amplitude.mixing"] = t.grad(tv.amplitude_mixing);
  result.grads["ttis.amplitude.shift"] = t.grad(tv.amplitude_shift);
  result.grads["ttis.phase.mixing"] = t.grad(tv.phase_mixing);
  result.grads["ttis.phase.shift"] = t.grad(tv.phase_shift);
  return result;
}

FeatureMap domain_agnostic(const Model& model, const FeatureMap& image,
                           const PipelineConfig& config) {
  return ttis::transform(model.backbone.extract(image), model.ttis,
                         config.ttis_options(/*training=*/false), nullptr);
}

fewshot::SegmentationResult predict(const Model& model, std::span<const LabeledImage> supports,
                                    const FeatureMap& query_image, const PipelineConfig& config) {
  const int factor = model.backbone.downsample_factor();
  std::vector<FeatureMap> features;
  std::vector<BinaryMask> masks;
  features.reserve(supports.size());
  masks.reserve(supports.size());
  for (const auto& s : supports) {
    features.push_back(domain_agnostic(model, *s.image, config));
    masks.push_back(feature_mask(*s.mask, factor, features.back().height(), features.back().width()));
  }
  std::vector<fewshot::SupportShot> shots;
  for (std::size_t k = 0; k < supports.size(); ++k) shots.push_back({&features[k], &masks[k]});
  return fewshot::segment_query(shots, domain_agnostic(model, query_image, config), config.weights);
}

}  // namespace fssti::training
