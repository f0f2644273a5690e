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

#include <optional>
#include <vector>

#include "fssti/core/rng.hpp"
#include "fssti/core/tensor.hpp"
#include "fssti/spectral/spectral.hpp"

namespace fssti::ttis {

/// Learnable affine term of one spectrum's ODE: a C x C channel-mixing matrix
/// and a C x 1 translation vector whose entry c scales delta(.)[c].
struct ChannelAffine {
  Mat mixing;
  Mat shift;

  int channels() const { return static_cast<int>(mixing.rows()); }
  static ChannelAffine identity(int channels);
};

struct TtisParams {
  ChannelAffine amplitude;
  ChannelAffine phase;

  int channels() const { return amplitude.channels(); }
  static TtisParams identity(int channels) {
    return {ChannelAffine::identity(channels), ChannelAffine::identity(channels)};
  }
  void validate() const;
};

/// Equally spaced points t_i = i * h, i = 0..n_intervals.
struct TimeGrid {
  int n_intervals = 10;
  double h = 0.01;

  double horizon() const { return n_intervals * h; }
  void validate() const;
};

enum class TtisMode { kTrainPerturbed, kEvalClean };

struct TtisOptions {
  TimeGrid grid;
  TtisMode mode = TtisMode::kEvalClean;
  /// false: evolve the raw feature planes instead of amplitude/phase.
  bool spectral = true;
  /// true: one first-interval step over the whole horizon, no iteration.
  bool single_step = false;
  /// Overrides the per-call draw of the perturbation factor.
  std::optional<double> alpha;
};

/// Per-channel re-standardization of a spectrum with factor alpha in [0, 1]:
/// target mean 2*alpha*mu, target std 2*(1-alpha)*sigma (population std,
/// divided by max(sigma, kSigmaFloor)).
Mat perturb_spectrum(const Mat& x, double alpha);
Mat perturb_spectrum_vjp(const Mat& x, double alpha, const Mat& grad_out);

inline constexpr double kSigmaFloor = 1e-6;

/// delta(X)[c] = mean over positions of (max_c X - X[c, :]).
Vec delta(const Mat& x);
/// Subgradient routes to the first maximal position (row-major).
Mat delta_vjp(const Mat& x, const Vec& grad_out);

/// Spectrum at t_1 from the current spectrum a1. In kTrainPerturbed mode the
/// forcing uses perturb_spectrum(a1, alpha); in kEvalClean it uses a1.
Mat first_interval_step(const Mat& a1, const ChannelAffine& p, double h, TtisMode mode,
                        double alpha = 0.5);

/// Approximations at t_{i-1} and t_{i-2}; `interval` is the index of the next
/// step to take (i >= 2).
struct TtisState {
  Mat current;
  Mat previous;
  int interval = 2;
};

TtisState subsequent_interval_step(const TtisState& state, const ChannelAffine& p, double h,
                                   int n_intervals);

/// Every approximation of one spectrum: states[0] is the input (which also
/// serves as the t_0 initial value), states[i] the value at t_i.
struct Trajectory {
  std::vector<Mat> states;
  double h = 0.0;
  bool perturbed = false;
  double alpha = 0.5;
  Mat forcing;  // the first-step forcing spectrum (perturbed or clean)

  const Mat& final() const { return states.back(); }
};

Trajectory evolve(const Mat& a1, const ChannelAffine& p, const TimeGrid& grid, TtisMode mode,
                  double alpha, bool single_step = false);

struct ChannelAffineGrad {
  Mat input;
  Mat mixing;
  Mat shift;
};

ChannelAffineGrad evolve_vjp(const Trajectory& traj, const ChannelAffine& p,
                             const Mat& grad_final);

/// Everything the backward pass needs from one transform call.
struct TransformTrace {
  FeatureMap input;
  TtisOptions options;
  double alpha = 0.5;
  spectral::AmpPhase spectrum;  // unused when !options.spectral
  Trajectory amplitude;         // raw-plane trajectory when !options.spectral
  Trajectory phase;
  FeatureMap output;
};

struct TtisGrads {
  Mat input;
  TtisParams params;
};

/// decompose -> first step -> n-1 subsequent steps -> reconstruct. One alpha is
/// drawn per call in kTrainPerturbed mode and shared by both spectra; kEvalClean
/// never touches the generator.
FeatureMap transform(const FeatureMap& f, const TtisParams& params, const TtisOptions& options,
                     Rng* rng);

TransformTrace transform_traced(const FeatureMap& f, const TtisParams& params,
                                const TtisOptions& options, Rng* rng);

TtisGrads transform_vjp(const TransformTrace& trace, const TtisParams& params,
                        const Mat& grad_output);

struct TransformWithGrad {
  FeatureMap output;
  TtisGrads grads;
};

TransformWithGrad transform_with_grad(const FeatureMap& f, const TtisParams& params,
                                      const TtisOptions& options, Rng* rng,
                                      const Mat& grad_output);

}  // namespace fssti::ttis
