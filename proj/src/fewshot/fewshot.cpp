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

#include "fssti/fewshot/fewshot.hpp"

#include <cmath>

namespace fssti::fewshot {

namespace kernels {

Vec masked_mean(const Mat& features, const RowVec& weights) {
  const double total = weights.sum();
  if (total <= 0.0) throw EmptyMaskError();
  return features * weights.transpose() / total;
}

Mat masked_mean_vjp(const RowVec& weights, const Vec& grad_out, Eigen::Index channels) {
  const double total = weights.sum();
  if (grad_out.size() != channels) throw ShapeError("masked_mean gradient has wrong length");
  return grad_out * weights / total;
}

namespace {

Eigen::Index column_of(const Mat& p, Eigen::Index j) { return p.cols() == 1 ? 0 : j; }

void check_cosine_shapes(const Mat& p, const Mat& q) {
  if (p.rows() != q.rows() || (p.cols() != 1 && p.cols() != q.cols()))
    throw ShapeError("cosine operands have incompatible shapes");
}

}  // namespace

RowVec cosine_columns(const Mat& p, const Mat& q) {
  check_cosine_shapes(p, q);
  RowVec out(q.cols());
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    const auto pj = p.col(column_of(p, j));
    const auto qj = q.col(j);
    out(j) = pj.dot(qj) / (std::max(pj.norm(), kNormFloor) * std::max(qj.norm(), kNormFloor));
  }
  return out;
}

CosineGrad cosine_columns_vjp(const Mat& p, const Mat& q, const RowVec& grad_out) {
  check_cosine_shapes(p, q);
  CosineGrad out{Mat::Zero(p.rows(), p.cols()), Mat::Zero(q.rows(), q.cols())};
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    const Eigen::Index pc = column_of(p, j);
    const auto pj = p.col(pc);
    const auto qj = q.col(j);
    const double p_len = pj.norm();
    const double q_len = qj.norm();
    const double p_norm = std::max(p_len, kNormFloor);
    const double q_norm = std::max(q_len, kNormFloor);
    const double dot = pj.dot(qj);
    const double g = grad_out(j);

    Vec dq = pj / (p_norm * q_norm);
    if (q_len > kNormFloor) dq -= dot / (p_norm * q_norm * q_norm) * qj / q_len;
    Vec dp = qj / (p_norm * q_norm);
    if (p_len > kNormFloor) dp -= dot / (p_norm * p_norm * q_norm) * pj / p_len;
    out.q.col(j) += g * dq;
    out.p.col(pc) += g * dp;
  }
  return out;
}

namespace {

Mat gather_columns(const Mat& q, std::span<const int> idx) {
  Mat b(q.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) b.col(static_cast<Eigen::Index>(k)) = q.col(idx[k]);
  return b;
}

// Column-wise softmax of B^T Q (each column sums to one over the background axis).
Mat background_weights(const Mat& b, const Mat& q) {
  Mat s = b.transpose() * q;
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    const double peak = s.col(j).maxCoeff();
    s.col(j) = (s.col(j).array() - peak).exp().matrix();
    s.col(j) /= s.col(j).sum();
  }
  return s;
}

}  // namespace

Mat adaptive_background(const Mat& query, std::span<const int> background) {
  if (background.empty()) throw EmptyMaskError();
  const Mat b = gather_columns(query, background);
  return b * background_weights(b, query);
}

Mat adaptive_background_vjp(const Mat& query, std::span<const int> background,
                            const Mat& grad_out) {
  const Mat b = gather_columns(query, background);
  const Mat w = background_weights(b, query);
  const Mat dw = b.transpose() * grad_out;
  // Softmax backward, column by column.
  const RowVec inner = (w.array() * dw.array()).colwise().sum();
  const Mat ds = (w.array() * (dw.rowwise() - inner).array()).matrix();

  Mat dq = b * ds;
  const Mat db = grad_out * w.transpose() + query * ds.transpose();
  for (std::size_t k = 0; k < background.size(); ++k)
    dq.col(background[k]) += db.col(static_cast<Eigen::Index>(k));
  return dq;
}

}  // namespace kernels

namespace {

void check_mask(const FeatureMap& f, const BinaryMask& m) {
  if (f.height() != m.height() || f.width() != m.width())
    throw ShapeError("mask " + std::to_string(m.height()) + "x" + std::to_string(m.width()) +
                     " does not match features " + std::to_string(f.height()) + "x" +
                     std::to_string(f.width()));
}

}  // namespace

Prototype map_prototype(const FeatureMap& f, const BinaryMask& m) {
  check_mask(f, m);
  return kernels::masked_mean(f.planes(), m.as_weights());
}

PredictionPair cosine_predict(const Prototype& fg, const Prototype& bg, const FeatureMap& query) {
  return {kernels::cosine_columns(fg, query.planes()), kernels::cosine_columns(bg, query.planes()),
          query.height(), query.width()};
}

PredictionPair cosine_predict(const Prototype& fg, const AdaptiveBgMap& bg,
                              const FeatureMap& query) {
  return {kernels::cosine_columns(fg, query.planes()), kernels::cosine_columns(bg, query.planes()),
          query.height(), query.width()};
}

BinaryMask binarize(const PredictionPair& p) {
  BinaryMask out(p.height, p.width);
  for (int y = 0; y < p.height; ++y)
    for (int x = 0; x < p.width; ++x) {
      const int j = y * p.width + x;
      out.set(y, x, p.foreground(j) > p.background(j));
    }
  return out;
}

std::vector<int> background_indices(const BinaryMask& m) {
  std::vector<int> idx;
  for (int j = 0; j < m.area(); ++j)
    if (m.at(j) == 0) idx.push_back(j);
  return idx;
}

Prototype self_support_fg(const FeatureMap& query, const BinaryMask& predicted,
                          const Prototype& fallback) {
  check_mask(query, predicted);
  if (predicted.count() == 0) return fallback;
  return map_prototype(query, predicted);
}

AdaptiveBgMap adaptive_bg(const FeatureMap& query, const BinaryMask& predicted,
                          const Prototype& fallback) {
  check_mask(query, predicted);
  const auto idx = background_indices(predicted);
  if (idx.empty()) return fallback.replicate(1, query.area());
  return kernels::adaptive_background(query.planes(), idx);
}

namespace {

template <typename T>
T average(std::span<const T> items) {
  if (items.empty()) throw std::invalid_argument("K-shot average of an empty list");
  T sum = items.front();
  for (std::size_t k = 1; k < items.size(); ++k) {
    if (items[k].rows() != sum.rows() || items[k].cols() != sum.cols())
      throw ShapeError("K-shot average over mismatched shapes");
    sum += items[k];
  }
  return sum / static_cast<double>(items.size());
}

}  // namespace

Prototype kshot_average(std::span<const Prototype> prototypes) { return average(prototypes); }
AdaptiveBgMap kshot_average(std::span<const AdaptiveBgMap> maps) { return average(maps); }

AdaptiveBgMap combine_background(const Prototype& support_bg, const AdaptiveBgMap& self_bg,
                                 const CombineWeights& w) {
  return combine(support_bg.replicate(1, self_bg.cols()), self_bg, w);
}

SegmentationResult segment_query(std::span<const SupportShot> supports, const FeatureMap& query,
                                 const CombineWeights& w) {
  if (supports.empty()) throw std::invalid_argument("segment_query needs at least one support");
  std::vector<Prototype> fg, bg, self_fg;
  std::vector<AdaptiveBgMap> self_bg;
  SegmentationTrace trace;
  for (const auto& shot : supports) {
    if (shot.features->channels() != query.channels())
      throw ShapeError("support and query channel counts differ");
    fg.push_back(map_prototype(*shot.features, *shot.mask));
    bg.push_back(map_prototype(*shot.features, shot.mask->complement()));
    const auto initial = binarize(cosine_predict(fg.back(), bg.back(), query));
    self_fg.push_back(self_support_fg(query, initial, fg.back()));
    self_bg.push_back(adaptive_bg(query, initial, bg.back()));
    trace.initial_masks.push_back(initial);
  }
  trace.support_fg = kshot_average(std::span<const Prototype>(fg));
  trace.support_bg = kshot_average(std::span<const Prototype>(bg));
  trace.self_fg = kshot_average(std::span<const Prototype>(self_fg));
  trace.self_bg = kshot_average(std::span<const AdaptiveBgMap>(self_bg));
  trace.combined_fg = combine(trace.support_fg, trace.self_fg, w);
  trace.combined_bg = combine_background(trace.support_bg, trace.self_bg, w);

  auto prediction = cosine_predict(trace.combined_fg, trace.combined_bg, query);
  auto mask = binarize(prediction);
  return {std::move(mask), std::move(prediction), std::move(trace)};
}

}  // namespace fssti::fewshot
