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
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fssti {

/// Row-major dense matrix. A C x (H*W) instance holds one channel plane per row,
/// which keeps every plane contiguous in memory.
template <typename Scalar>
using PlaneMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Mat = PlaneMatrix<double>;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Real C x H x W tensor, channel-major then row-major.
template <typename Scalar>
class BasicFeatureMap {
 public:
  using Planes = PlaneMatrix<Scalar>;

  BasicFeatureMap() = default;

  BasicFeatureMap(int channels, int height, int width)
      : height_(height), width_(width) {
    check_dims(channels, height, width);
    planes_ = Planes::Zero(channels, static_cast<Eigen::Index>(height) * width);
  }

  BasicFeatureMap(int height, int width, Planes planes)
      : height_(height), width_(width), planes_(std::move(planes)) {
    check_dims(static_cast<int>(planes_.rows()), height, width);
    if (planes_.cols() != static_cast<Eigen::Index>(height) * width)
      throw ShapeError("feature map planes have " +
                       std::to_string(planes_.cols()) + " columns, expected " +
                       std::to_string(height * width));
  }

  int channels() const { return static_cast<int>(planes_.rows()); }
  int height() const { return height_; }
  int width() const { return width_; }
  int area() const { return height_ * width_; }
  std::size_t size() const { return static_cast<std::size_t>(planes_.size()); }

  const Planes& planes() const { return planes_; }
  Planes& planes() { return planes_; }

  Scalar operator()(int c, int y, int x) const { return planes_(c, y * width_ + x); }
  Scalar& operator()(int c, int y, int x) { return planes_(c, y * width_ + x); }

  bool same_shape(const BasicFeatureMap& other) const {
    return channels() == other.channels() && height_ == other.height_ &&
           width_ == other.width_;
  }

  bool all_finite() const { return planes_.allFinite(); }

  bool operator==(const BasicFeatureMap& other) const {
    return same_shape(other) && planes_ == other.planes_;
  }

 private:
  static void check_dims(int c, int h, int w) {
    if (c < 1 || h < 1 || w < 1)
      throw ShapeError("feature map dimensions must be >= 1, got " +
                       std::to_string(c) + "x" + std::to_string(h) + "x" +
                       std::to_string(w));
  }

  int height_ = 0;
  int width_ = 0;
  Planes planes_;
};

using FeatureMap = BasicFeatureMap<double>;

/// H x W mask with entries in {0, 1}.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width, std::uint8_t fill = 0);
  BinaryMask(int height, int width, std::vector<std::uint8_t> values);

  int height() const { return height_; }
  int width() const { return width_; }
  int area() const { return height_ * width_; }

  std::uint8_t operator()(int y, int x) const { return values_[index(y, x)]; }
  void set(int y, int x, bool on) { values_[index(y, x)] = on ? 1 : 0; }
  std::uint8_t at(int flat) const { return values_[static_cast<std::size_t>(flat)]; }

  const std::vector<std::uint8_t>& values() const { return values_; }

  int count() const;
  BinaryMask complement() const;
  /// Mask entries as a 1 x (H*W) row of 0.0 / 1.0.
  RowVec as_weights() const;

  /// Block-mean downsampling by an integer factor; a cell is on when at least
  /// half of its block is on.
  BinaryMask downsample(int factor) const;

  bool operator==(const BinaryMask&) const = default;

 private:
  std::size_t index(int y, int x) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> values_;
};

}  // namespace fssti
