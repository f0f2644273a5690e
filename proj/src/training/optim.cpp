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

#include "fssti/training/optim.hpp"

namespace fssti::training {

void sgd_step(std::vector<ParamUpdate> params, OptimState& state) {
  for (auto& p : params) {
    if (p.grad->rows() != p.value->rows() || p.grad->cols() != p.value->cols())
      throw ShapeError("gradient shape mismatch for parameter '" + p.name + "'");
  }
  for (auto& p : params) {
    auto [it, inserted] = state.buffers.try_emplace(p.name);
    Mat& buf = it->second;
    if (inserted) {
      buf = *p.grad;
    } else {
      if (buf.rows() != p.value->rows() || buf.cols() != p.value->cols())
        throw ShapeError("momentum buffer shape mismatch for parameter '" + p.name + "'");
      buf = state.momentum * buf + *p.grad;
    }
    *p.value -= state.learning_rate * buf;
  }
}

}  // namespace fssti::training
