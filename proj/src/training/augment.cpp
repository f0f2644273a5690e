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

#include "fssti/training/augment.hpp"

#include <algorithm>
#include <vector>

namespace fssti::training {

namespace {

// Flat source index of every output pixel of an n x n plane.
std::vector<int> source_indices(const QueryAugment& op, int n) {
  if (!op.is_identity_shuffle() && n % 2 != 0)
    throw ShapeError("grid shuffle needs an even image size");
  const int half = n / 2;
  std::vector<int> src(static_cast<std::size_t>(n) * n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      // Undo the ops from last to first.
      int sy = y;
      int sx = x;
      if (!op.is_identity_shuffle()) {
        const int cell = op.cells[static_cast<std::size_t>((sy / half) * 2 + sx / half)];
        sy = (cell / 2) * half + sy % half;
        sx = (cell % 2) * half + sx % half;
      }
      for (int t = 0; t < op.quarter_turns % 4; ++t) {
        // out(y, x) = in(x, n-1-y) for one counter-clockwise turn.
        const int py = sx;
        const int px = n - 1 - sy;
        sy = py;
        sx = px;
      }
      if (op.vertical_flip) sy = n - 1 - sy;
      if (op.horizontal_flip) sx = n - 1 - sx;
      src[static_cast<std::size_t>(y) * n + x] = sy * n + sx;
    }
  return src;
}

void check_square(int h, int w) {
  if (h != w) throw ShapeError("query augmentation needs square inputs");
}

}  // namespace

QueryAugment QueryAugment::draw(Rng& rng) {
  QueryAugment op;
  op.horizontal_flip = rng.uniform_index(2) == 1;
  op.vertical_flip = rng.uniform_index(2) == 1;
  op.quarter_turns = static_cast<int>(rng.uniform_index(4));
  if (rng.uniform_index(2) == 1) {
    auto steps = rng.uniform_index(23) + 1;
    while (steps-- > 0) std::next_permutation(op.cells.begin(), op.cells.end());
  }
  return op;
}

FeatureMap apply(const QueryAugment& op, const FeatureMap& image) {
  check_square(image.height(), image.width());
  const auto src = source_indices(op, image.height());
  Mat out(image.channels(), image.area());
  for (int c = 0; c < image.channels(); ++c)
    for (std::size_t i = 0; i < src.size(); ++i)
      out(c, static_cast<Eigen::Index>(i)) = image.planes()(c, src[i]);
  return FeatureMap(image.height(), image.width(), std::move(out));
}

BinaryMask apply(const QueryAugment& op, const BinaryMask& mask) {
  check_square(mask.height(), mask.width());
  const auto src = source_indices(op, mask.height());
  std::vector<std::uint8_t> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = mask.at(src[i]);
  return BinaryMask(mask.height(), mask.width(), std::move(out));
}

std::pair<FeatureMap, BinaryMask> augment_for_query(const FeatureMap& image,
                                                     const BinaryMask& mask, Rng& rng) {
  if (image.height() != mask.height() || image.width() != mask.width())
    throw ShapeError("augmentation image and mask differ in size");
  const auto op = QueryAugment::draw(rng);
  return {apply(op, image), apply(op, mask)};
}

}  // namespace fssti::training
