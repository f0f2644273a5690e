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

#include "fssti/spectral/spectral.hpp"

#include <cmath>
#include <numbers>

namespace fssti::spectral {

namespace {

using Complex = std::complex<double>;

void check_shapes(const AmpPhase& s) {
  if (s.amplitude.rows() != s.phase.rows() || s.amplitude.cols() != s.phase.cols() ||
      s.amplitude.cols() != static_cast<Eigen::Index>(s.height) * s.width)
    throw ShapeError("amplitude/phase shapes are inconsistent");
}

ComplexPlanes<double> polar_planes(const AmpPhase& s) {
  ComplexPlanes<double> z(s.amplitude.rows(), s.amplitude.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double a = s.amplitude.data()[i];
    const double p = s.phase.data()[i];
    z.data()[i] = Complex(a * std::cos(p), a * std::sin(p));
  }
  return z;
}

ComplexPlanes<double> real_spectrum(const FeatureMap& f) {
  auto spectrum = fft2<double>(f.planes(), f.height(), f.width());
  hermitian_project(spectrum, f.height(), f.width());
  return spectrum;
}

}  // namespace

AmpPhase decompose(const FeatureMap& f) {
  const auto spectrum = real_spectrum(f);
  AmpPhase out{Mat(spectrum.rows(), spectrum.cols()), Mat(spectrum.rows(), spectrum.cols()),
               f.height(), f.width()};
  for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
    const Complex z = spectrum.data()[i];
    const double mag = std::abs(z);
    double arg = mag == 0.0 ? 0.0 : std::atan2(z.imag(), z.real());
    if (arg <= -std::numbers::pi) arg = std::numbers::pi;  // keep (-pi, pi]
    out.amplitude.data()[i] = mag;
    out.phase.data()[i] = arg;
  }
  return out;
}

FeatureMap reconstruct(const AmpPhase& s) {
  check_shapes(s);
  const auto spatial = ifft2<double>(polar_planes(s), s.height, s.width);
  return FeatureMap(s.height, s.width, spatial.real());
}

double reconstruction_residue(const AmpPhase& s) {
  check_shapes(s);
  const auto spatial = ifft2<double>(polar_planes(s), s.height, s.width);
  return spatial.imag().cwiseAbs().maxCoeff();
}

Mat decompose_vjp(const FeatureMap& input, const Mat& grad_amplitude, const Mat& grad_phase) {
  const auto spectrum = real_spectrum(input);
  ComplexPlanes<double> g(spectrum.rows(), spectrum.cols());
  for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
    const Complex z = spectrum.data()[i];
    const double r2 = std::norm(z);
    if (r2 == 0.0) {
      g.data()[i] = 0.0;
      continue;
    }
    const double r = std::sqrt(r2);
    const double ga = grad_amplitude.data()[i];
    const double gp = grad_phase.data()[i];
    g.data()[i] = Complex(ga * z.real() / r - gp * z.imag() / r2,
                          ga * z.imag() / r + gp * z.real() / r2);
  }
  hermitian_project(g, input.height(), input.width());
  // dL/dx = Re(sum_k g_k exp(+2 pi i k.n / N)) = N * Re(ifft2(g)).
  const double n = static_cast<double>(input.area());
  return n * ifft2<double>(g, input.height(), input.width()).real();
}

AmpPhaseGrad reconstruct_vjp(const AmpPhase& s, const Mat& grad_output) {
  check_shapes(s);
  // For f = Re(ifft2(z)), dL/dRe z + i dL/dIm z = fft2(g) / N.
  const double n = static_cast<double>(s.height) * s.width;
  const ComplexPlanes<double> gz = fft2<double>(grad_output, s.height, s.width) / n;
  AmpPhaseGrad out{Mat(gz.rows(), gz.cols()), Mat(gz.rows(), gz.cols())};
  for (Eigen::Index i = 0; i < gz.size(); ++i) {
    const double a = s.amplitude.data()[i];
    const double c = std::cos(s.phase.data()[i]);
    const double sn = std::sin(s.phase.data()[i]);
    const Complex g = gz.data()[i];
    out.amplitude.data()[i] = g.real() * c + g.imag() * sn;
    out.phase.data()[i] = a * (-g.real() * sn + g.imag() * c);
  }
  return out;
}

}  // namespace fssti::spectral
