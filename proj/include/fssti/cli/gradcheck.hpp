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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fssti/core/rng.hpp"
#include "fssti/core/tensor.hpp"

namespace fssti::cli {

inline constexpr double kIsolatedTolerance = 1e-4;
inline constexpr double kComposedTolerance = 1e-3;

struct GradcheckEntry {
  std::string suite;
  std::string parameter;
  double relative_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return relative_error <= tolerance; }
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  bool passed() const;
  /// First failing entry, if any.
  std::optional<GradcheckEntry> first_failure() const;
};

struct GradcheckOptions {
  std::uint64_t seed = 0;
  /// Test hook: negates the analytic gradient of the named parameter.
  std::string flip_sign_of;
};

/// ||a - f||_2 / max(||a||_2, ||f||_2, 1e-12) over the probed entries.
double relative_error(const Mat& analytic, const Mat& numeric);

/// Central differences of a scalar function at every entry of x (or at
/// `max_entries` seeded entries of larger tensors; unprobed entries are 0 in
/// both returned matrices).
struct FiniteDifference {
  Mat analytic;  // analytic restricted to probed entries
  Mat numeric;
};
FiniteDifference central_difference(const std::function<double(const Mat&)>& f, const Mat& x,
                                    const Mat& analytic, double eps, int max_entries, Rng& rng);

/// Finite-difference suites: spectral, ttis, fewshot, losses, backbone
/// (isolated ops, 1e-4) and the composed episode loss (1e-3).
GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace fssti::cli
