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

#include "fssti/core/tensor.hpp"

#include <algorithm>

namespace fssti {

BinaryMask::BinaryMask(int height, int width, std::uint8_t fill)
    : height_(height), width_(width) {
  if (height < 1 || width < 1) throw ShapeError("mask dimensions must be >= 1");
  if (fill > 1) throw std::invalid_argument("mask entries must be 0 or 1");
  values_.assign(static_cast<std::size_t>(height) * width, fill);
}

BinaryMask::BinaryMask(int height, int width, std::vector<std::uint8_t> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (height < 1 || width < 1) throw ShapeError("mask dimensions must be >= 1");
  if (values_.size() != static_cast<std::size_t>(height) * width)
    throw ShapeError("mask buffer length does not match " +
                     std::to_string(height) + "x" + std::to_string(width));
  if (std::any_of(values_.begin(), values_.end(), [](auto v) { return v > 1; }))
    throw std::invalid_argument("mask entries must be 0 or 1");
}

int BinaryMask::count() const {
  return static_cast<int>(std::count(values_.begin(), values_.end(), 1));
}

BinaryMask BinaryMask::complement() const {
  BinaryMask out = *this;
  for (auto& v : out.values_) v = 1 - v;
  return out;
}

RowVec BinaryMask::as_weights() const {
  RowVec w(static_cast<Eigen::Index>(values_.size()));
  for (std::size_t i = 0; i < values_.size(); ++i) w(static_cast<Eigen::Index>(i)) = values_[i];
  return w;
}

BinaryMask BinaryMask::downsample(int factor) const {
  if (factor == 1) return *this;
  if (factor < 1 || height_ % factor != 0 || width_ % factor != 0)
    throw ShapeError("mask " + std::to_string(height_) + "x" +
                     std::to_string(width_) + " is not divisible by " +
                     std::to_string(factor));
  const int oh = height_ / factor;
  const int ow = width_ / factor;
  const int block = factor * factor;
  BinaryMask out(oh, ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      int on = 0;
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx) on += (*this)(y * factor + dy, x * factor + dx);
      out.set(y, x, 2 * on >= block);
    }
  }
  return out;
}

}  // namespace fssti
