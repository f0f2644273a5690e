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

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fssti/core/tensor.hpp"

namespace fssti::episodes {

enum class Shape { kDisk = 0, kSquare, kTriangle, kRing, kCross, kBar };
inline constexpr int kNumShapes = 6;

const char* to_string(Shape s);

enum class Domain { kSource, kTarget };

/// Per-channel colour affine, a gain on the lowest quarter of non-DC DFT
/// frequencies (by radius), and additive Gaussian noise.
struct DomainStyle {
  std::array<double, 3> gain{1.0, 1.0, 1.0};
  std::array<double, 3> bias{0.0, 0.0, 0.0};
  double low_frequency_boost = 1.0;
  double noise = 0.02;

  static DomainStyle source();
  static DomainStyle target();
};

struct SynthSpec {
  int image_size = 64;
  int images_per_category = 40;
  std::vector<int> source_categories{0, 1, 2};
  std::vector<int> target_categories{3, 4, 5};
  DomainStyle source_style = DomainStyle::source();
  DomainStyle target_style = DomainStyle::target();
  std::uint64_t seed = 0;
  /// Feature resolution divisor; the downsampled mask of every image must be
  /// neither empty nor full.
  int feature_stride = 8;

  void validate() const;
};

/// One RGB image in [0, 1] with its exact foreground mask.
struct Sample {
  std::string id;
  int category = 0;
  Domain domain = Domain::kSource;
  FeatureMap image;
  BinaryMask mask;
};

class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Sample> samples);

  const std::vector<Sample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  const Sample& by_id(const std::string& id) const;
  /// Indices into samples() for one category, in generation order.
  std::vector<std::size_t> category_indices(int category) const;
  std::vector<int> categories(Domain domain) const;

 private:
  std::vector<Sample> samples_;
};

/// Deterministic in spec.seed. Ids are "<s|t><category>_<index>".
Dataset generate_dataset(const SynthSpec& spec);

/// Writes image FTNS and mask FMSK files plus the manifest under `dir`.
void export_dataset(const Dataset& dataset, const std::filesystem::path& dir);
/// Reads a directory written by export_dataset; category and domain come
/// from the ids.
Dataset import_dataset(const std::filesystem::path& dir);

/// Scales the complex DFT coefficients of the lowest `fraction` of non-DC
/// bins (by radial frequency) of every plane by `boost`.
Mat boost_low_frequencies(const Mat& planes, int h, int w, double boost, double fraction = 0.25);

}  // namespace fssti::episodes
