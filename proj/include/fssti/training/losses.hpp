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

#include "fssti/core/tensor.hpp"
#include "fssti/fewshot/fewshot.hpp"
#include "fssti/ttis/ttis.hpp"

namespace fssti::training {

inline constexpr double kDefaultTemperature = 10.0;

namespace kernels {

/// Mean over pixels of -[m log p + (1-m) log(1-p)] with
/// p = softmax(tau*fg, tau*bg)[0] = sigmoid(tau*(fg - bg)), evaluated through
/// a softplus so saturated pixels stay finite without clamping.
double bce(const RowVec& fg, const RowVec& bg, const RowVec& mask, double tau);

struct BceGrad {
  RowVec fg;
  RowVec bg;
};
BceGrad bce_vjp(const RowVec& fg, const RowVec& bg, const RowVec& mask, double tau,
                double grad_out);

}  // namespace kernels

double bce_on_similarities(const fewshot::PredictionPair& p, const BinaryMask& m,
                           double tau = kDefaultTemperature);

/// LU determinant.
double determinant(const Mat& m);
/// d det(M) / dM = adj(M)^T, valid for singular M as well.
Mat determinant_grad(const Mat& m);

enum class RegForm {
  kSigned,    // det(Ma) - 1 + det(Mp) - 1 + mean(Va) + mean(Vp)
  kAbsolute,  // |det(Ma) - 1| + |det(Mp) - 1| + |mean(Va)| + |mean(Vp)|
};

double reg_loss(const ttis::TtisParams& params, RegForm form = RegForm::kSigned);
/// (Sub)gradient of reg_loss; sign(0) = 0 in the absolute form.
ttis::TtisParams reg_loss_grad(const ttis::TtisParams& params, RegForm form = RegForm::kSigned);

}  // namespace fssti::training
