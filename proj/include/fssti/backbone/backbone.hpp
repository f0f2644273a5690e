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

#include <string>
#include <vector>

#include "fssti/autodiff/tape.hpp"
#include "fssti/core/rng.hpp"
#include "fssti/core/tensor.hpp"

namespace fssti::backbone {

struct ConvLayer {
  Mat weight;  // out x (in * k * k)
  Mat bias;    // out x 1
  int kernel = 3;
  int stride = 2;
  int padding = 1;
  bool relu = true;

  int in_channels() const { return static_cast<int>(weight.cols()) / (kernel * kernel); }
  int out_channels() const { return static_cast<int>(weight.rows()); }
  int out_size(int n) const { return (n + 2 * padding - kernel) / stride + 1; }
};

enum class TrainableScope { kAll, kLastLayerOnly, kNone };

struct NamedParam {
  std::string name;
  Mat* value;
  bool trainable;
};

/// Small stride-8 convolutional feature extractor, or a 1x1 projection over
/// precomputed features. Weights are plain values; gradients come from the tape.
class Backbone {
 public:
  /// 3 -> 16 -> 32 -> out_channels, 3x3 stride-2 convs, ReLU after the first
  /// two; Glorot-uniform weights, zero biases.
  static Backbone conv_stack(int out_channels, Rng& rng);
  /// Single identity-initialized 1x1 layer for external features.
  static Backbone projection(int channels);

  FeatureMap extract(const FeatureMap& image) const;

  struct Vars {
    std::vector<ad::Var> weights;
    std::vector<ad::Var> biases;
  };
  /// Registers weights as tape leaves; frozen layers become constants.
  Vars bind(ad::Tape& tape) const;
  ad::Var forward(ad::Tape& tape, const Vars& vars, const FeatureMap& image) const;

  void set_trainable(TrainableScope scope) { scope_ = scope; }
  TrainableScope trainable() const { return scope_; }
  bool layer_trainable(std::size_t layer) const;

  std::vector<NamedParam> named_parameters();

  int in_channels() const { return layers_.front().in_channels(); }
  int out_channels() const { return layers_.back().out_channels(); }
  int downsample_factor() const;
  bool is_projection() const { return layers_.size() == 1 && layers_[0].kernel == 1; }

  const std::vector<ConvLayer>& layers() const { return layers_; }
  std::vector<ConvLayer>& layers() { return layers_; }

  /// Rebuilds structure from named tensors ("backbone.<i>.weight"/".bias").
  static Backbone from_layers(std::vector<ConvLayer> layers) {
    Backbone b;
    b.layers_ = std::move(layers);
    return b;
  }

 private:
  void check_input(const FeatureMap& image) const;

  std::vector<ConvLayer> layers_;
  TrainableScope scope_ = TrainableScope::kAll;
};

// Convolution kernels over C x (H*W) planes.
Mat im2col(const Mat& input, int h, int w, const ConvLayer& layer);
Mat col2im(const Mat& cols, int channels, int h, int w, const ConvLayer& layer);
Mat conv_forward(const Mat& input, int h, int w, const ConvLayer& layer);

ad::Var conv(ad::Tape& tape, ad::Var input, int h, int w, ad::Var weight, ad::Var bias,
             const ConvLayer& geometry);
ad::Var relu(ad::Tape& tape, ad::Var x);

}  // namespace fssti::backbone
