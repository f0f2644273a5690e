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

#include <span>
#include <stdexcept>
#include <vector>

#include "fssti/core/tensor.hpp"

namespace fssti::fewshot {

/// C-dimensional prototype (masked average of feature columns).
using Prototype = Vec;
/// Per-position background prototypes, C x (H*W).
using AdaptiveBgMap = Mat;

struct PredictionPair {
  RowVec foreground;
  RowVec background;
  int height = 0;
  int width = 0;
};

class EmptyMaskError : public std::runtime_error {
 public:
  EmptyMaskError() : std::runtime_error("masked average pooling over an empty mask") {}
};

inline constexpr double kNormFloor = 1e-8;

struct CombineWeights {
  double support = 0.5;  // alpha_1
  double self = 0.5;     // alpha_2
};

// Matrix-level kernels. A feature map is its C x (H*W) plane matrix; every
// kernel has a vector-Jacobian product for the training graph.
namespace kernels {

/// Column mean of `features` over positions with weight 1.
Vec masked_mean(const Mat& features, const RowVec& weights);
Mat masked_mean_vjp(const RowVec& weights, const Vec& grad_out, Eigen::Index channels);

/// cos(p_j, q_j) per column, with ||.|| floored at kNormFloor. `p` is C x 1
/// (broadcast over columns) or C x N.
RowVec cosine_columns(const Mat& p, const Mat& q);
struct CosineGrad {
  Mat p;
  Mat q;
};
CosineGrad cosine_columns_vjp(const Mat& p, const Mat& q, const RowVec& grad_out);

/// B * softmax(B^T Q) with B = columns of Q at `background` indices and the
/// softmax taken over the background axis.
Mat adaptive_background(const Mat& query, std::span<const int> background);
Mat adaptive_background_vjp(const Mat& query, std::span<const int> background,
                            const Mat& grad_out);

}  // namespace kernels

/// Masked average pooling; throws EmptyMaskError for an all-zero mask.
Prototype map_prototype(const FeatureMap& f, const BinaryMask& m);

PredictionPair cosine_predict(const Prototype& fg, const Prototype& bg, const FeatureMap& query);
PredictionPair cosine_predict(const Prototype& fg, const AdaptiveBgMap& bg,
                              const FeatureMap& query);

/// 1 where foreground similarity strictly exceeds background similarity.
BinaryMask binarize(const PredictionPair& p);

/// Masked average of the query under its own predicted mask; `fallback` when
/// the prediction has no foreground.
Prototype self_support_fg(const FeatureMap& query, const BinaryMask& predicted,
                          const Prototype& fallback);

/// Adaptive self-support background; `fallback` broadcast when the prediction
/// has no background.
AdaptiveBgMap adaptive_bg(const FeatureMap& query, const BinaryMask& predicted,
                          const Prototype& fallback);

Prototype kshot_average(std::span<const Prototype> prototypes);
AdaptiveBgMap kshot_average(std::span<const AdaptiveBgMap> maps);

template <typename A, typename B>
auto combine(const Eigen::MatrixBase<A>& support, const Eigen::MatrixBase<B>& self,
             const CombineWeights& w) {
  return (w.support * support + w.self * self).eval();
}
/// Global support background broadcast against a per-position map.
AdaptiveBgMap combine_background(const Prototype& support_bg, const AdaptiveBgMap& self_bg,
                                 const CombineWeights& w);

std::vector<int> background_indices(const BinaryMask& m);

struct SupportShot {
  const FeatureMap* features;
  const BinaryMask* mask;  // at feature resolution
};

/// Intermediate products of one query segmentation.
struct SegmentationTrace {
  Prototype support_fg;
  Prototype support_bg;
  std::vector<BinaryMask> initial_masks;  // per shot
  Prototype self_fg;
  AdaptiveBgMap self_bg;
  Prototype combined_fg;
  AdaptiveBgMap combined_bg;
};

struct SegmentationResult {
  BinaryMask mask;
  PredictionPair prediction;
  SegmentationTrace trace;
};

SegmentationResult segment_query(std::span<const SupportShot> supports, const FeatureMap& query,
                                 const CombineWeights& w);

}  // namespace fssti::fewshot
