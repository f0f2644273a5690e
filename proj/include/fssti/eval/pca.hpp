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

#include <filesystem>
#include <string>
#include <vector>

#include "fssti/core/tensor.hpp"

namespace fssti::eval {

inline constexpr double kPowerTolerance = 1e-9;
inline constexpr int kPowerMaxIterations = 10000;

struct PcaResult {
  Vec mean;
  std::vector<Vec> components;       // unit principal directions, descending variance
  std::vector<double> variances;     // eigenvalues of the covariance
  Mat coordinates;                   // n x 2 projections of the centred points
};

/// Top-2 principal directions by power iteration with deflation on the
/// covariance of mean-centred points. Throws for fewer than 3 points or
/// all-identical points.
PcaResult pca_top2(const std::vector<Vec>& points);

/// Writes "label,pc1,pc2" rows (with that header) and returns the fit.
PcaResult pca_export(const std::vector<Vec>& points, const std::vector<std::string>& labels,
                     const std::filesystem::path& path);

/// Spatial mean of each channel.
Vec channel_means(const FeatureMap& f);

}  // namespace fssti::eval
