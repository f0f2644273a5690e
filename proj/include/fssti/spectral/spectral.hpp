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
#include "fssti/spectral/fft.hpp"

namespace fssti::spectral {

/// Amplitude and phase planes of a feature map's per-channel 2D DFT.
/// Right after decompose the amplitude is nonnegative and the phase lies in
/// (-pi, pi]; transformed spectra may leave both ranges.
template <typename Scalar>
struct BasicAmpPhase {
  PlaneMatrix<Scalar> amplitude;
  PlaneMatrix<Scalar> phase;
  int height = 0;
  int width = 0;

  int channels() const { return static_cast<int>(amplitude.rows()); }
};

using AmpPhase = BasicAmpPhase<double>;

/// Per-channel DFT, split into |F| and arg F. Zero-magnitude bins get phase 0.
AmpPhase decompose(const FeatureMap& f);

/// Real part of the inverse DFT of amplitude * exp(i * phase).
FeatureMap reconstruct(const AmpPhase& s);

/// Largest |imag| of the inverse DFT that reconstruct discards.
double reconstruction_residue(const AmpPhase& s);

/// Gradient w.r.t. the input of decompose, given gradients w.r.t. amplitude
/// and phase. Zero-magnitude bins pass no gradient.
Mat decompose_vjp(const FeatureMap& input, const Mat& grad_amplitude, const Mat& grad_phase);

struct AmpPhaseGrad {
  Mat amplitude;
  Mat phase;
};

/// Gradient of reconstruct w.r.t. amplitude and phase.
AmpPhaseGrad reconstruct_vjp(const AmpPhase& s, const Mat& grad_output);

}  // namespace fssti::spectral
