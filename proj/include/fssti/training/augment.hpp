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
#include <utility>

#include "fssti/core/rng.hpp"
#include "fssti/core/tensor.hpp"

namespace fssti::training {

/// One spatial op: optional flips, then `quarter_turns` counter-clockwise
/// rotations, then a permutation of the 2 x 2 grid cells (output cell j takes
/// input cell cells[j]).
struct QueryAugment {
  bool horizontal_flip = false;
  bool vertical_flip = false;
  int quarter_turns = 0;
  std::array<int, 4> cells{0, 1, 2, 3};

  bool is_identity_shuffle() const { return cells == std::array<int, 4>{0, 1, 2, 3}; }

  /// Uniform over flips x rotations x {identity, one of the 23 non-identity
  /// cell permutations}.
  static QueryAugment draw(Rng& rng);
};

FeatureMap apply(const QueryAugment& op, const FeatureMap& image);
BinaryMask apply(const QueryAugment& op, const BinaryMask& mask);

/// Synthesizes a query from a support pair with one random op; square,
/// even-sized inputs only.
std::pair<FeatureMap, BinaryMask> augment_for_query(const FeatureMap& image,
                                                     const BinaryMask& mask, Rng& rng);

}  // namespace fssti::training
