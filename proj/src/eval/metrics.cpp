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

#include "fssti/eval/metrics.hpp"

#include <set>
#include <stdexcept>

namespace fssti::eval {

double iou(const BinaryMask& pred, const BinaryMask& gt) {
  if (pred.height() != gt.height() || pred.width() != gt.width())
    throw ShapeError("IoU masks differ in size");
  int inter = 0;
  int uni = 0;
  for (int i = 0; i < pred.area(); ++i) {
    inter += pred.at(i) & gt.at(i);
    uni += pred.at(i) | gt.at(i);
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

BinaryMask upsample(const BinaryMask& m, int factor) {
  if (factor < 1) throw std::invalid_argument("upsampling factor must be positive");
  BinaryMask out(m.height() * factor, m.width() * factor);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) out.set(y, x, m(y / factor, x / factor) != 0);
  return out;
}

EvalReport evaluate(const training::Model& model, const episodes::FinetunePool& pool,
                    const episodes::TestSet& test, const training::PipelineConfig& config,
                    episodes::AccessAudit* audit) {
  if (test.total() == 0) throw std::invalid_argument("evaluation needs a non-empty test set");
  const auto pool_ids = pool.ids();
  for (const auto& id : test.ids())
    if (pool_ids.count(id)) throw std::logic_error("test query '" + id + "' is a pool support");

  const int factor = model.backbone.downsample_factor();
  EvalReport report;
  report.k = pool.k();
  report.pool_ids.assign(pool_ids.begin(), pool_ids.end());
  for (int cat : pool.categories()) {
    if (test.size(cat) == 0) continue;
    std::vector<FeatureMap> features;
    std::vector<BinaryMask> masks;
    for (int k = 0; k < pool.k(); ++k) {
      const auto& s = pool.support(cat, k, episodes::AccessPhase::kEvalSupport, audit);
      features.push_back(training::domain_agnostic(model, s.image, config));
      masks.push_back(s.mask.downsample(factor));
    }
    std::vector<fewshot::SupportShot> shots;
    for (std::size_t k = 0; k < features.size(); ++k) shots.push_back({&features[k], &masks[k]});

    double total = 0.0;
    for (std::size_t i = 0; i < test.size(cat); ++i) {
      const auto& q = test.query(cat, i, audit);
      const auto seg = fewshot::segment_query(
          shots, training::domain_agnostic(model, q.image, config), config.weights);
      total += iou(upsample(seg.mask, factor), q.mask);
    }
    report.per_category[cat] = total / static_cast<double>(test.size(cat));
  }
  if (report.per_category.empty())
    throw std::invalid_argument("no pool category has test queries");
  double sum = 0.0;
  for (const auto& [cat, v] : report.per_category) sum += v;
  report.miou = sum / static_cast<double>(report.per_category.size());
  return report;
}

}  // namespace fssti::eval
