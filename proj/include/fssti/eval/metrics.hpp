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
#include <map>
#include <string>
#include <vector>

#include "fssti/episodes/sampling.hpp"
#include "fssti/training/pipeline.hpp"

namespace fssti::eval {

/// |pred & gt| / |pred | gt|; two empty masks score 1.
double iou(const BinaryMask& pred, const BinaryMask& gt);

/// Nearest-neighbour upsampling by an integer factor.
BinaryMask upsample(const BinaryMask& m, int factor);

struct EvalReport {
  std::map<int, double> per_category;  // mean foreground IoU per category
  double miou = 0.0;
  std::uint64_t seed = 0;
  int k = 0;
  std::vector<std::string> pool_ids;
};

/// Segments every test query of every pool category with that category's
/// pool supports (clean transform). Predictions are upsampled to image
/// resolution before scoring. Reads are logged to `audit` if given.
EvalReport evaluate(const training::Model& model, const episodes::FinetunePool& pool,
                    const episodes::TestSet& test, const training::PipelineConfig& config,
                    episodes::AccessAudit* audit = nullptr);

}  // namespace fssti::eval
