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

#include "fssti/backbone/backbone.hpp"

#include <cmath>

namespace fssti::backbone {

Mat im2col(const Mat& input, int h, int w, const ConvLayer& layer) {
  const int k = layer.kernel;
  const int oh = layer.out_size(h);
  const int ow = layer.out_size(w);
  const auto channels = static_cast<int>(input.rows());
  Mat cols = Mat::Zero(static_cast<Eigen::Index>(channels) * k * k,
                       static_cast<Eigen::Index>(oh) * ow);
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + ky) * k + kx;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * layer.stride - layer.padding + ky;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * layer.stride - layer.padding + kx;
            if (ix < 0 || ix >= w) continue;
            cols(row, oy * ow + ox) = input(c, iy * w + ix);
          }
        }
      }
  return cols;
}

Mat col2im(const Mat& cols, int channels, int h, int w, const ConvLayer& layer) {
  const int k = layer.kernel;
  const int oh = layer.out_size(h);
  const int ow = layer.out_size(w);
  Mat out = Mat::Zero(channels, static_cast<Eigen::Index>(h) * w);
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + ky) * k + kx;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * layer.stride - layer.padding + ky;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * layer.stride - layer.padding + kx;
            if (ix < 0 || ix >= w) continue;
            out(c, iy * w + ix) += cols(row, oy * ow + ox);
          }
        }
      }
  return out;
}

Mat conv_forward(const Mat& input, int h, int w, const ConvLayer& layer) {
  Mat out = layer.weight * im2col(input, h, w, layer);
  out.colwise() += layer.bias.col(0);
  return out;
}

ad::Var conv(ad::Tape& tape, ad::Var input, int h, int w, ad::Var weight, ad::Var bias,
             const ConvLayer& geometry) {
  Mat cols = im2col(tape.value(input), h, w, geometry);
  Mat out = tape.value(weight) * cols;
  out.colwise() += tape.value(bias).col(0);
  const auto channels = static_cast<int>(tape.value(input).rows());
  return tape.record(
      std::move(out), {input, weight, bias},
      [=, cols = std::move(cols)](ad::Tape& t, const Mat& g) {
        if (t.requires_grad(weight)) t.accumulate(weight, g * cols.transpose());
        if (t.requires_grad(bias)) t.accumulate(bias, g.rowwise().sum());
        if (t.requires_grad(input))
          t.accumulate(input, col2im(t.value(weight).transpose() * g, channels, h, w, geometry));
      });
}

ad::Var relu(ad::Tape& tape, ad::Var x) {
  const Mat& v = tape.value(x);
  return tape.record(v.cwiseMax(0.0), {x}, [x](ad::Tape& t, const Mat& g) {
    t.accumulate(x, Mat((t.value(x).array() > 0.0).select(g.array(), 0.0)));
  });
}

namespace {

ConvLayer glorot_layer(int in, int out, bool relu, Rng& rng) {
  ConvLayer layer;
  layer.relu = relu;
  const int taps = layer.kernel * layer.kernel;
  const double bound = std::sqrt(6.0 / (in * taps + out * taps));
  layer.weight.resize(out, static_cast<Eigen::Index>(in) * taps);
  for (Eigen::Index i = 0; i < layer.weight.size(); ++i)
    layer.weight.data()[i] = rng.uniform(-bound, bound);
  layer.bias = Mat::Zero(out, 1);
  return layer;
}

}  // namespace

Backbone Backbone::conv_stack(int out_channels, Rng& rng) {
  Backbone b;
  b.layers_.push_back(glorot_layer(3, 16, true, rng));
  b.layers_.push_back(glorot_layer(16, 32, true, rng));
  b.layers_.push_back(glorot_layer(32, out_channels, false, rng));
  return b;
}

Backbone Backbone::projection(int channels) {
  ConvLayer layer;
  layer.kernel = 1;
  layer.stride = 1;
  layer.padding = 0;
  layer.relu = false;
  layer.weight = Mat::Identity(channels, channels);
  layer.bias = Mat::Zero(channels, 1);
  Backbone b;
  b.layers_.push_back(std::move(layer));
  return b;
}

int Backbone::downsample_factor() const {
  int f = 1;
  for (const auto& l : layers_) f *= l.stride;
  return f;
}

void Backbone::check_input(const FeatureMap& image) const {
  const int f = downsample_factor();
  if (image.channels() != in_channels())
    throw ShapeError("backbone expects " + std::to_string(in_channels()) + " input channels, got " +
                     std::to_string(image.channels()));
  if (image.height() % f != 0 || image.width() % f != 0)
    throw ShapeError("input " + std::to_string(image.height()) + "x" +
                     std::to_string(image.width()) + " is not divisible by " + std::to_string(f));
}

FeatureMap Backbone::extract(const FeatureMap& image) const {
  check_input(image);
  Mat x = image.planes();
  int h = image.height();
  int w = image.width();
  for (const auto& layer : layers_) {
    x = conv_forward(x, h, w, layer);
    if (layer.relu) x = x.cwiseMax(0.0);
    h = layer.out_size(h);
    w = layer.out_size(w);
  }
  return FeatureMap(h, w, std::move(x));
}

bool Backbone::layer_trainable(std::size_t layer) const {
  switch (scope_) {
    case TrainableScope::kAll: return true;
    case TrainableScope::kLastLayerOnly: return layer + 1 == layers_.size();
    case TrainableScope::kNone: return false;
  }
  return false;
}

Backbone::Vars Backbone::bind(ad::Tape& tape) const {
  Vars vars;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const bool train = layer_trainable(i);
    vars.weights.push_back(tape.leaf(layers_[i].weight, train));
    vars.biases.push_back(tape.leaf(layers_[i].bias, train));
  }
  return vars;
}

ad::Var Backbone::forward(ad::Tape& tape, const Vars& vars, const FeatureMap& image) const {
  check_input(image);
  ad::Var x = tape.constant(image.planes());
  int h = image.height();
  int w = image.width();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& layer = layers_[i];
    x = conv(tape, x, h, w, vars.weights[i], vars.biases[i], layer);
    if (layer.relu) x = relu(tape, x);
    h = layer.out_size(h);
    w = layer.out_size(w);
  }
  return x;
}

std::vector<NamedParam> Backbone::named_parameters() {
  std::vector<NamedParam> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string prefix = "backbone." + std::to_string(i);
    const bool train = layer_trainable(i);
    out.push_back({prefix + ".bias", &layers_[i].bias, train});
    out.push_back({prefix + ".weight", &layers_[i].weight, train});
  }
  return out;
}

}  // namespace fssti::backbone
