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

#include "fssti/training/losses.hpp"

#include <cmath>

#include <Eigen/LU>

namespace fssti::training {

namespace kernels {

namespace {

void check(const RowVec& fg, const RowVec& bg, const RowVec& mask, double tau) {
  if (fg.size() != bg.size() || fg.size() != mask.size() || fg.size() == 0)
    throw ShapeError("BCE inputs must share a nonzero length");
  if (!(tau > 0.0)) throw std::invalid_argument("BCE temperature must be positive");
}

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double bce(const RowVec& fg, const RowVec& bg, const RowVec& mask, double tau) {
  check(fg, bg, mask, tau);
  double total = 0.0;
  for (Eigen::Index i = 0; i < fg.size(); ++i) {
    const double z = tau * (fg[i] - bg[i]);
    // -log sigmoid(z) = softplus(-z); -log(1 - sigmoid(z)) = softplus(z).
    total += mask[i] * softplus(-z) + (1.0 - mask[i]) * softplus(z);
  }
  return total / static_cast<double>(fg.size());
}

BceGrad bce_vjp(const RowVec& fg, const RowVec& bg, const RowVec& mask, double tau,
                double grad_out) {
  check(fg, bg, mask, tau);
  BceGrad g{RowVec(fg.size()), RowVec(fg.size())};
  const double scale = grad_out * tau / static_cast<double>(fg.size());
  for (Eigen::Index i = 0; i < fg.size(); ++i) {
    const double d = scale * (sigmoid(tau * (fg[i] - bg[i])) - mask[i]);
    g.fg[i] = d;
    g.bg[i] = -d;
  }
  return g;
}

}  // namespace kernels

double bce_on_similarities(const fewshot::PredictionPair& p, const BinaryMask& m, double tau) {
  if (m.height() != p.height || m.width() != p.width)
    throw ShapeError("BCE mask does not match prediction resolution");
  return kernels::bce(p.foreground, p.background, m.as_weights(), tau);
}

double determinant(const Mat& m) {
  if (m.rows() != m.cols()) throw ShapeError("determinant of a non-square matrix");
  if (m.rows() == 0) return 1.0;
  return Eigen::PartialPivLU<Mat>(m).determinant();
}

Mat determinant_grad(const Mat& m) {
  if (m.rows() != m.cols()) throw ShapeError("determinant of a non-square matrix");
  const Eigen::Index n = m.rows();
  const Eigen::FullPivLU<Mat> lu(m);
  if (lu.isInvertible()) return determinant(m) * Mat(lu.inverse().transpose());
  // Singular: cofactors by explicit minors. Only hit on degenerate inputs.
  Mat cof(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      Mat minor(n - 1, n - 1);
      for (Eigen::Index r = 0, mr = 0; r < n; ++r) {
        if (r == i) continue;
        for (Eigen::Index c = 0, mc = 0; c < n; ++c) {
          if (c == j) continue;
          minor(mr, mc++) = m(r, c);
        }
        ++mr;
      }
      cof(i, j) = ((i + j) % 2 == 0 ? 1.0 : -1.0) * determinant(minor);
    }
  return cof;
}

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

double reg_loss(const ttis::TtisParams& params, RegForm form) {
  const double da = determinant(params.amplitude.mixing) - 1.0;
  const double dp = determinant(params.phase.mixing) - 1.0;
  const double va = params.amplitude.shift.mean();
  const double vp = params.phase.shift.mean();
  if (form == RegForm::kSigned) return da + dp + va + vp;
  return std::abs(da) + std::abs(dp) + std::abs(va) + std::abs(vp);
}

ttis::TtisParams reg_loss_grad(const ttis::TtisParams& params, RegForm form) {
  const auto side = [form](const ttis::ChannelAffine& p) {
    double sd = 1.0;
    double sv = 1.0;
    if (form == RegForm::kAbsolute) {
      sd = sign(determinant(p.mixing) - 1.0);
      sv = sign(p.shift.mean());
    }
    ttis::ChannelAffine g;
    g.mixing = sd * determinant_grad(p.mixing);
    g.shift = Mat::Constant(p.shift.rows(), p.shift.cols(),
                            sv / static_cast<double>(p.shift.size()));
    return g;
  };
  return {side(params.amplitude), side(params.phase)};
}

}  // namespace fssti::training
