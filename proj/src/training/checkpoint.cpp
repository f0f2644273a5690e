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

#include "fssti/training/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "fssti/core/io.hpp"

namespace fssti::training {

std::vector<backbone::NamedParam> Model::named_parameters() {
  auto out = backbone.named_parameters();
  out.push_back({"ttis.amplitude.mixing", &ttis.amplitude.mixing, true});
  out.push_back({"ttis.amplitude.shift", &ttis.amplitude.shift, true});
  out.push_back({"ttis.phase.mixing", &ttis.phase.mixing, true});
  out.push_back({"ttis.phase.shift", &ttis.phase.shift, true});
  return out;
}

Model initial_model(int channels, Rng& rng) {
  return {backbone::Backbone::conv_stack(channels, rng), ttis::TtisParams::identity(channels)};
}

Model initial_projection_model(int channels) {
  return {backbone::Backbone::projection(channels), ttis::TtisParams::identity(channels)};
}

const FeatureMap& Checkpoint::at(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t.value;
  throw std::out_of_range("checkpoint has no tensor '" + name + "'");
}

bool Checkpoint::operator==(const Checkpoint& other) const {
  if (tensors.size() != other.tensors.size()) return false;
  for (std::size_t i = 0; i < tensors.size(); ++i)
    if (tensors[i].name != other.tensors[i].name || !(tensors[i].value == other.tensors[i].value))
      return false;
  return true;
}

namespace {

// Stored values are exactly what a written file reads back.
NamedTensor rounded(std::string name, FeatureMap value) {
  value.planes() = value.planes().cast<float>().cast<double>();
  return {std::move(name), std::move(value)};
}

}  // namespace

Checkpoint to_checkpoint(const Model& model) {
  Checkpoint ckpt;
  const auto& layers = model.backbone.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string prefix = "backbone." + std::to_string(i);
    ckpt.tensors.push_back(rounded(prefix + ".bias", FeatureMap(1, 1, l.bias)));
    // out x (in*k*k) and out x in x (k*k) share the row-major layout.
    ckpt.tensors.push_back(
        rounded(prefix + ".weight", FeatureMap(l.in_channels(), l.kernel * l.kernel, l.weight)));
  }
  const auto add = [&](const std::string& name, const Mat& m) {
    ckpt.tensors.push_back(rounded(name, FeatureMap(1, static_cast<int>(m.cols()), m)));
  };
  add("ttis.amplitude.mixing", model.ttis.amplitude.mixing);
  add("ttis.amplitude.shift", model.ttis.amplitude.shift);
  add("ttis.phase.mixing", model.ttis.phase.mixing);
  add("ttis.phase.shift", model.ttis.phase.shift);
  return ckpt;
}

Model from_checkpoint(const Checkpoint& ckpt) {
  std::vector<backbone::ConvLayer> layers;
  for (std::size_t i = 0;; ++i) {
    const std::string prefix = "backbone." + std::to_string(i);
    const auto found = std::find_if(ckpt.tensors.begin(), ckpt.tensors.end(),
                                    [&](const NamedTensor& t) { return t.name == prefix + ".weight"; });
    if (found == ckpt.tensors.end()) break;
    const FeatureMap& w = found->value;
    const FeatureMap& b = ckpt.at(prefix + ".bias");
    backbone::ConvLayer l;
    l.kernel = static_cast<int>(std::lround(std::sqrt(static_cast<double>(w.width()))));
    if (l.kernel * l.kernel != w.width() || (l.kernel != 1 && l.kernel != 3))
      throw ShapeError("checkpoint tensor '" + prefix + ".weight' has an unsupported kernel");
    l.stride = l.kernel == 3 ? 2 : 1;
    l.padding = l.kernel == 3 ? 1 : 0;
    l.weight = w.planes();
    l.bias = b.planes();
    if (l.bias.rows() != l.weight.rows() || l.bias.cols() != 1)
      throw ShapeError("checkpoint tensor '" + prefix + ".bias' does not match its weight");
    layers.push_back(std::move(l));
  }
  if (layers.empty()) throw std::invalid_argument("checkpoint holds no backbone layers");
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].relu = i + 1 < layers.size();
  for (std::size_t i = 1; i < layers.size(); ++i)
    if (layers[i].in_channels() != layers[i - 1].out_channels())
      throw ShapeError("checkpoint backbone layers do not chain");

  Model model{backbone::Backbone::from_layers(std::move(layers)), {}};
  model.ttis.amplitude.mixing = ckpt.at("ttis.amplitude.mixing").planes();
  model.ttis.amplitude.shift = ckpt.at("ttis.amplitude.shift").planes();
  model.ttis.phase.mixing = ckpt.at("ttis.phase.mixing").planes();
  model.ttis.phase.shift = ckpt.at("ttis.phase.shift").planes();
  model.ttis.validate();
  if (model.ttis.channels() != model.backbone.out_channels())
    throw ShapeError("checkpoint TTIs parameters do not match the backbone width");
  return model;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing", path);
  out.write(kCheckpointMagic, 4);
  write_u32(out, kCheckpointVersion);
  for (const auto& t : ckpt.tensors) {
    write_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    encode_feature(out, t.value, path.string() + ":" + t.name);
  }
  if (!out) throw IoError("checkpoint write failed", path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint", path);
  const std::string context = path.string();
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4) throw FormatError(FormatErrorKind::kTruncated, context);
  if (!std::equal(magic, magic + 4, kCheckpointMagic))
    throw FormatError(FormatErrorKind::kBadMagic, context);
  if (read_u32(in, context) != kCheckpointVersion)
    throw FormatError(FormatErrorKind::kBadVersion, context);
  Checkpoint ckpt;
  std::uint32_t len = 0;
  while (try_read_u32(in, len, context)) {
    if (len == 0 || len > 4096) throw FormatError(FormatErrorKind::kBadShape, context);
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (in.gcount() != static_cast<std::streamsize>(len))
      throw FormatError(FormatErrorKind::kTruncated, context);
    ckpt.tensors.push_back({name, decode_feature(in, context + ":" + name)});
  }
  return ckpt;
}

Model quantize(const Model& model) {
  Model q = from_checkpoint(to_checkpoint(model));
  q.backbone.set_trainable(model.backbone.trainable());
  return q;
}

}  // namespace fssti::training
