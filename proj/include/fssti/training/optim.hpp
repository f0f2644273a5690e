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

#include <map>
#include <string>
#include <vector>

#include "fssti/core/tensor.hpp"

namespace fssti::training {

inline constexpr double kDefaultMomentum = 0.9;
inline constexpr double kDefaultLrSource = 0.001;
inline constexpr double kDefaultLrFinetune = 0.0005;

/// Heavy-ball SGD state; one buffer per parameter name, created on first use.
struct OptimState {
  double momentum = kDefaultMomentum;
  double learning_rate = kDefaultLrSource;
  std::map<std::string, Mat> buffers;
};

struct ParamUpdate {
  std::string name;
  Mat* value;
  const Mat* grad;
};

/// buffer <- momentum * buffer + grad; value <- value - lr * buffer.
void sgd_step(std::vector<ParamUpdate> params, OptimState& state);

}  // namespace fssti::training
