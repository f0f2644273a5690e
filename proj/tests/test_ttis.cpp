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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "fssti/ttis/ttis.hpp"
#include "oracles.hpp"

namespace fssti::ttis {
namespace {

ChannelAffine random_affine(int c, Rng& rng, double scale = 0.5) {
  return {Mat::Identity(c, c) + oracle::random_mat(c, c, rng, -scale, scale),
          oracle::random_mat(c, 1, rng, -1.0, 1.0)};
}

TtisParams random_params(int c, Rng& rng) { return {random_affine(c, rng), random_affine(c, rng)}; }

TtisOptions clean(int n = 10, double h = 0.01) {
  TtisOptions o;
  o.grid = {n, h};
  return o;
}

Vec row_mean(const Mat& x) { return x.rowwise().mean(); }

Vec row_pop_std(const Mat& x) {
  return ((x.colwise() - row_mean(x)).array().square().rowwise().mean()).sqrt().matrix();
}

TEST(Perturb, HalfIsExactIdentity) {
  Rng rng(1);
  const Mat x = oracle::random_mat(4, 25, rng, 0.0, 5.0);
  EXPECT_LE(oracle::max_abs(perturb_spectrum(x, 0.5) - x), 1e-12);
}

TEST(Perturb, ZeroCentersAndDoublesSpread) {
  Rng rng(2);
  const Mat x = oracle::random_mat(3, 16, rng, 0.0, 5.0);
  const Mat expect = 2.0 * (x.colwise() - row_mean(x));
  EXPECT_LE(oracle::max_abs(perturb_spectrum(x, 0.0) - expect), 1e-12);
}

TEST(Perturb, OneCollapsesToTwiceTheMean) {
  Rng rng(3);
  const Mat x = oracle::random_mat(3, 16, rng, 0.0, 5.0);
  const Mat out = perturb_spectrum(x, 1.0);
  for (Eigen::Index c = 0; c < x.rows(); ++c)
    EXPECT_LE((out.row(c).array() - 2.0 * x.row(c).mean()).abs().maxCoeff(), 1e-12);
}

TEST(Perturb, HitsTargetStatisticsForAnyAlpha) {
  Rng rng(4);
  const Mat x = oracle::random_mat(5, 30, rng, -2.0, 3.0);
  for (double alpha : {0.1, 0.37, 0.8}) {
    const Mat out = perturb_spectrum(x, alpha);
    EXPECT_LE((row_mean(out) - 2.0 * alpha * row_mean(x)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((row_pop_std(out) - 2.0 * (1.0 - alpha) * row_pop_std(x)).cwiseAbs().maxCoeff(),
              1e-12);
  }
}

TEST(Perturb, ConstantChannelStaysFinite) {
  Mat x = Mat::Constant(2, 9, 3.0);
  const Mat out = perturb_spectrum(x, 0.2);
  EXPECT_TRUE(out.allFinite());
  EXPECT_LE((out.array() - 1.2).abs().maxCoeff(), 1e-12);
}

TEST(Delta, MatchesWorkedExamples) {
  Mat x(1, 4);
  x << 1, 2, 3, 4;
  EXPECT_DOUBLE_EQ(delta(x)(0), 1.5);
  EXPECT_EQ(delta(Mat::Constant(3, 7, 2.5)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Delta, MatchesLoopOracle) {
  Rng rng(5);
  const Mat x = oracle::random_mat(4, 64, rng);
  EXPECT_LE((delta(x) - oracle::delta(x)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Delta, SubgradientGoesToFirstMaximum) {
  Mat x(1, 4);
  x << 2, 5, 5, 1;
  const Mat g = delta_vjp(x, Vec::Ones(1));
  EXPECT_DOUBLE_EQ(g(0, 1), 0.75);  // 1 - 1/N at the first maximum
  EXPECT_DOUBLE_EQ(g(0, 2), -0.25);
  EXPECT_DOUBLE_EQ(g(0, 0), -0.25);
}

TEST(FirstStep, ZeroAffineIsExponentialGrowth) {
  Rng rng(6);
  const Mat a = oracle::random_mat(3, 16, rng);
  const ChannelAffine zero{Mat::Zero(3, 3), Mat::Zero(3, 1)};
  EXPECT_LE(oracle::max_abs(first_interval_step(a, zero, 0.01, TtisMode::kEvalClean) -
                            std::exp(0.01) * a),
            1e-15);
}

TEST(FirstStep, TinyIntervalIsNearIdentity) {
  Rng rng(7);
  const Mat a = oracle::random_mat(3, 16, rng, -4.0, 4.0);
  const auto p = random_affine(3, rng);
  const Mat out = first_interval_step(a, p, 1e-9, TtisMode::kTrainPerturbed, 0.3);
  EXPECT_LE(oracle::max_abs(out - a), 1e-6 * (1.0 + oracle::max_abs(a)));
}

TEST(FirstStep, PerturbedAtHalfEqualsClean) {
  Rng rng(8);
  const Mat a = oracle::random_mat(3, 16, rng);
  const auto p = random_affine(3, rng);
  EXPECT_EQ(first_interval_step(a, p, 0.01, TtisMode::kTrainPerturbed, 0.5),
            first_interval_step(a, p, 0.01, TtisMode::kEvalClean));
}

TEST(FirstStep, MatchesQuadratureWithinTrapezoidBound) {
  Rng rng(9);
  const Mat b = oracle::random_mat(3, 16, rng);
  const auto p = random_affine(3, rng);
  // A curved path with a nonzero leading trapezoid error term.
  const auto path = [&](double s) -> Mat { return (s + 2.0 * s * s) * b; };
  const double h = 0.01;
  const Mat exact = oracle::first_interval_quadrature(path, p, h, 10000);
  const Mat step = first_interval_step(path(h), p, h, TtisMode::kEvalClean);
  Mat q = p.mixing * b;
  const Vec d = oracle::delta(b);
  for (Eigen::Index c = 0; c < q.rows(); ++c) q.row(c).array() += p.shift(c, 0) * d(c);
  EXPECT_LE(oracle::max_abs(step - exact), 10.0 * h * h * h * oracle::max_abs(q));
}

TEST(SubsequentStep, MatchesStraightLineOracle) {
  Rng rng(10);
  const Mat prev = oracle::random_mat(4, 20, rng);
  const Mat prev2 = oracle::random_mat(4, 20, rng);
  const auto p = random_affine(4, rng);
  const auto next = subsequent_interval_step({prev, prev2, 2}, p, 0.01, 10);
  EXPECT_LE(oracle::max_abs(next.current - oracle::subsequent_step(prev, prev2, p, 0.01)), 1e-10);
  EXPECT_EQ(next.previous, prev);
  EXPECT_EQ(next.interval, 3);
}

TEST(SubsequentStep, RejectsOutOfRangeInterval) {
  const ChannelAffine p = ChannelAffine::identity(2);
  const Mat z = Mat::Zero(2, 4);
  EXPECT_THROW(subsequent_interval_step({z, z, 1}, p, 0.01, 10), std::out_of_range);
  EXPECT_THROW(subsequent_interval_step({z, z, 11}, p, 0.01, 10), std::out_of_range);
}

TEST(Transform, ZeroAffineScalesBothSpectraByExpOfHorizon) {
  Rng rng(11);
  const auto f = oracle::random_feature(3, 6, 6, rng);
  const TtisParams zero{{Mat::Zero(3, 3), Mat::Zero(3, 1)}, {Mat::Zero(3, 3), Mat::Zero(3, 1)}};
  const auto trace = transform_traced(f, zero, clean(), nullptr);
  const double g = std::exp(0.1);
  EXPECT_LE(oracle::rel_inf(trace.amplitude.final(), g * trace.spectrum.amplitude), 1e-12);
  EXPECT_LE(oracle::rel_inf(trace.phase.final(), g * trace.spectrum.phase), 1e-12);
  // The phase is scaled too, so the feature is e^{nh}-scaled only on the
  // raw-plane path.
  const spectral::AmpPhase scaled{g * trace.spectrum.amplitude, g * trace.spectrum.phase, 6, 6};
  EXPECT_LE(oracle::max_abs(trace.output.planes() - spectral::reconstruct(scaled).planes()), 1e-12);
  TtisOptions raw = clean();
  raw.spectral = false;
  EXPECT_LE(oracle::rel_inf(transform(f, zero, raw, nullptr).planes(), g * f.planes()), 1e-12);
}

TEST(Transform, TinyGridIsNearIdentity) {
  Rng rng(12);
  const auto f = oracle::random_feature(3, 6, 6, rng);
  const auto out = transform(f, random_params(3, rng), clean(10, 1e-7), nullptr);
  EXPECT_LE(oracle::rel_inf(out.planes(), f.planes()), 1e-3);
}

TEST(Transform, EqualsComposedStepOracle) {
  Rng rng(13);
  const auto f = oracle::random_feature(3, 6, 6, rng);
  const auto params = random_params(3, rng);
  const auto s = spectral::decompose(f);
  const auto run = [&](const Mat& a1, const ChannelAffine& p) {
    Mat prev2 = a1;
    Mat prev = first_interval_step(a1, p, 0.01, TtisMode::kEvalClean);
    for (int i = 2; i <= 10; ++i) {
      Mat next = oracle::subsequent_step(prev, prev2, p, 0.01);
      prev2 = prev;
      prev = next;
    }
    return prev;
  };
  spectral::AmpPhase expect = s;
  expect.amplitude = run(s.amplitude, params.amplitude);
  expect.phase = run(s.phase, params.phase);
  const auto out = transform(f, params, clean(), nullptr);
  EXPECT_LE(oracle::max_abs(out.planes() - spectral::reconstruct(expect).planes()), 1e-8);
}

TEST(Transform, EvalCleanConsumesNoRandomness) {
  Rng rng(14);
  const auto f = oracle::random_feature(2, 4, 4, rng);
  Rng probe(99);
  transform(f, TtisParams::identity(2), clean(), &probe);
  EXPECT_EQ(probe.draws(), 0u);
}

TEST(Transform, PerturbedIsDeterministicPerSeed) {
  Rng rng(15);
  const auto f = oracle::random_feature(3, 4, 4, rng);
  const auto params = random_params(3, rng);
  TtisOptions o = clean();
  o.mode = TtisMode::kTrainPerturbed;
  Rng a(5), b(5), c(6);
  const auto fa = transform(f, params, o, &a);
  EXPECT_EQ(fa, transform(f, params, o, &b));
  EXPECT_NE(fa, transform(f, params, o, &c));
  EXPECT_GT(a.draws(), 0u);
}

TEST(Transform, PerturbedAtHalfMatchesClean) {
  Rng rng(16);
  const auto f = oracle::random_feature(3, 4, 4, rng);
  const auto params = random_params(3, rng);
  TtisOptions o = clean();
  o.mode = TtisMode::kTrainPerturbed;
  o.alpha = 0.5;
  EXPECT_EQ(transform(f, params, o, nullptr), transform(f, params, clean(), nullptr));
}

TEST(Transform, ChannelPermutationEquivariant) {
  Rng rng(17);
  const int c = 4;
  const auto f = oracle::random_feature(c, 5, 5, rng);
  const auto params = random_params(c, rng);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(c);
  perm.indices() << 2, 0, 3, 1;
  const Mat pm = perm;
  const auto permute = [&](const ChannelAffine& a) {
    return ChannelAffine{pm * a.mixing * pm.transpose(), pm * a.shift};
  };
  const FeatureMap fp(5, 5, pm * f.planes());
  const auto out = transform(f, params, clean(), nullptr);
  const auto outp =
      transform(fp, {permute(params.amplitude), permute(params.phase)}, clean(), nullptr);
  EXPECT_LE(oracle::max_abs(outp.planes() - pm * out.planes()), 1e-10);
}

TEST(Transform, RejectsChannelMismatch) {
  Rng rng(18);
  EXPECT_THROW(transform(oracle::random_feature(3, 4, 4, rng), TtisParams::identity(2), clean(),
                         nullptr),
               std::invalid_argument);
}

TEST(TransformGrad, LinearCaseHasConstantInputGradient) {
  Rng rng(19);
  const auto f = oracle::random_feature(2, 4, 4, rng);
  const TtisParams zero{{Mat::Zero(2, 2), Mat::Zero(2, 1)}, {Mat::Zero(2, 2), Mat::Zero(2, 1)}};
  // The raw-plane path with M = 0, V = 0 is the linear map e^{nh} * f.
  TtisOptions o = clean();
  o.spectral = false;
  const auto r = transform_with_grad(f, zero, o, nullptr, Mat::Ones(2, 16));
  EXPECT_LE((r.grads.input.array() - std::exp(0.1)).abs().maxCoeff(), 1e-12);
}

TEST(TransformGrad, ZeroUpstreamGivesZeroGradients) {
  Rng rng(20);
  const auto f = oracle::random_feature(2, 4, 4, rng);
  const auto r = transform_with_grad(f, random_params(2, rng), clean(), nullptr, Mat::Zero(2, 16));
  EXPECT_EQ(r.grads.input.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(r.grads.params.amplitude.mixing.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(r.grads.params.phase.shift.cwiseAbs().maxCoeff(), 0.0);
}

TEST(TtisParams, ValidateRejectsNonFinite) {
  auto p = TtisParams::identity(3);
  p.phase.shift(1, 0) = std::nan("");
  EXPECT_THROW(p.validate(), std::invalid_argument);
  EXPECT_THROW((TimeGrid{0, 0.01}.validate()), std::invalid_argument);
  EXPECT_THROW((TimeGrid{10, 0.0}.validate()), std::invalid_argument);
}

}  // namespace
}  // namespace fssti::ttis
