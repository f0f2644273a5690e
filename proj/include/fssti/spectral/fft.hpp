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

#include <complex>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "fssti/core/tensor.hpp"

namespace fssti::spectral {

template <typename Scalar>
using ComplexPlanes = PlaneMatrix<std::complex<Scalar>>;

namespace detail {

template <typename Scalar>
Eigen::FFT<Scalar>& fft_engine() {
  // Plans are cached per size inside the engine, which is not thread-safe.
  thread_local Eigen::FFT<Scalar> engine;
  return engine;
}

/// In-place 2D transform of every row of `planes`, each viewed as an h x w image.
/// Length-1 passes are skipped: the 1-point DFT is the identity, and the
/// engine has no factorization for it.
template <typename Scalar>
void transform_planes(ComplexPlanes<Scalar>& planes, int h, int w, bool inverse) {
  auto& engine = fft_engine<Scalar>();
  std::vector<std::complex<Scalar>> in, out;
  for (Eigen::Index c = 0; c < planes.rows(); ++c) {
    std::complex<Scalar>* plane = planes.row(c).data();
    in.resize(static_cast<std::size_t>(w));
    for (int y = 0; y < h && w > 1; ++y) {
      std::copy(plane + y * w, plane + (y + 1) * w, in.begin());
      inverse ? engine.inv(out, in) : engine.fwd(out, in);
      std::copy(out.begin(), out.end(), plane + y * w);
    }
    in.resize(static_cast<std::size_t>(h));
    for (int x = 0; x < w && h > 1; ++x) {
      for (int y = 0; y < h; ++y) in[static_cast<std::size_t>(y)] = plane[y * w + x];
      inverse ? engine.inv(out, in) : engine.fwd(out, in);
      for (int y = 0; y < h; ++y) plane[y * w + x] = out[static_cast<std::size_t>(y)];
    }
  }
}

}  // namespace detail

/// Forward 2D DFT of each channel plane: F[k] = sum_n x[n] exp(-2 pi i k.n / N).
template <typename Scalar>
ComplexPlanes<Scalar> fft2(const PlaneMatrix<Scalar>& planes, int h, int w) {
  ComplexPlanes<Scalar> out = planes.template cast<std::complex<Scalar>>();
  detail::transform_planes(out, h, w, /*inverse=*/false);
  return out;
}

template <typename Scalar>
ComplexPlanes<Scalar> fft2(const ComplexPlanes<Scalar>& planes, int h, int w) {
  ComplexPlanes<Scalar> out = planes;
  detail::transform_planes(out, h, w, /*inverse=*/false);
  return out;
}

/// Inverse 2D DFT, normalized by 1 / (h * w).
template <typename Scalar>
ComplexPlanes<Scalar> ifft2(const ComplexPlanes<Scalar>& planes, int h, int w) {
  ComplexPlanes<Scalar> out = planes;
  detail::transform_planes(out, h, w, /*inverse=*/true);
  return out;
}

/// Projects each plane onto the Hermitian-symmetric subspace,
/// F[k] <- (F[k] + conj(F[-k])) / 2. Exact for spectra of real input; it
/// zeroes round-off in the imaginary part of self-conjugate bins. The map is
/// self-adjoint under the real inner product.
template <typename Scalar>
void hermitian_project(ComplexPlanes<Scalar>& planes, int h, int w) {
  for (Eigen::Index c = 0; c < planes.rows(); ++c) {
    std::complex<Scalar>* p = planes.row(c).data();
    for (int y = 0; y < h; ++y) {
      const int my = (h - y) % h;
      for (int x = 0; x < w; ++x) {
        const int mx = (w - x) % w;
        const int a = y * w + x;
        const int b = my * w + mx;
        if (b < a) continue;
        const auto avg = (p[a] + std::conj(p[b])) / Scalar(2);
        p[a] = avg;
        p[b] = std::conj(avg);
      }
    }
  }
}

}  // namespace fssti::spectral
