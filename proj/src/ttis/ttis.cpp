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

#include "fssti/ttis/ttis.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fssti::ttis {

ChannelAffine ChannelAffine::identity(int channels) {
  return {Mat::Identity(channels, channels), Mat::Zero(channels, 1)};
}

void TtisParams::validate() const {
  const int c = channels();
  for (const auto* p : {&amplitude, &phase}) {
    if (p->mixing.rows() != c || p->mixing.cols() != c || p->shift.rows() != c ||
        p->shift.cols() != 1)
      throw ShapeError("TTIs parameters must be C x C mixing and C x 1 shift with C = " +
                       std::to_string(c));
    if (!p->mixing.allFinite() || !p->shift.allFinite())
      throw std::invalid_argument("TTIs parameters must be finite");
  }
}

void TimeGrid::validate() const {
  if (n_intervals < 1) throw std::invalid_argument("time grid needs n_intervals >= 1");
  if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("time grid needs h > 0");
}

namespace {

void check_channels(const Mat& x, const ChannelAffine& p) {
  if (x.rows() != p.mixing.rows() || p.mixing.cols() != p.mixing.rows() ||
      p.shift.rows() != p.mixing.rows())
    throw ShapeError("spectrum has " + std::to_string(x.rows()) +
                     " channels but TTIs parameters have " + std::to_string(p.mixing.rows()));
}

// Adds -scale * shift[c] * d[c] to every position of channel c.
void subtract_broadcast(Mat& out, const Mat& shift, const Vec& d, double scale) {
  const Vec per_channel = scale * shift.col(0).cwiseProduct(d);
  out.colwise() -= per_channel;
}

}  // namespace

Mat perturb_spectrum(const Mat& x, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("perturbation factor must lie in [0, 1]");
  Mat out(x.rows(), x.cols());
  const double n = static_cast<double>(x.cols());
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    const double mu = x.row(c).sum() / n;
    const double sigma = std::sqrt((x.row(c).array() - mu).square().sum() / n);
    const double mu_r = 2.0 * alpha * mu;
    const double sigma_r = 2.0 * (1.0 - alpha) * sigma;
    out.row(c) = ((x.row(c).array() - mu) / std::max(sigma, kSigmaFloor) * sigma_r + mu_r).matrix();
  }
  return out;
}

Mat perturb_spectrum_vjp(const Mat& x, double alpha, const Mat& grad_out) {
  Mat out(x.rows(), x.cols());
  const double n = static_cast<double>(x.cols());
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    const double mu = x.row(c).sum() / n;
    const RowVec centered = x.row(c).array() - mu;
    const double sigma = std::sqrt(centered.squaredNorm() / n);
    const double floor_sigma = std::max(sigma, kSigmaFloor);
    const double ratio = 2.0 * (1.0 - alpha) * sigma / floor_sigma;
    const RowVec g = grad_out.row(c);
    const double g_mean = g.sum() / n;

    RowVec dx = ratio * (g.array() - g_mean).matrix();
    dx.array() += 2.0 * alpha * g_mean;
    // ratio only varies with sigma below the floor.
    if (sigma < kSigmaFloor && sigma > 0.0) {
      const double d_ratio = g.dot(centered);
      const double d_sigma = d_ratio * 2.0 * (1.0 - alpha) / kSigmaFloor;
      dx += (d_sigma / (n * sigma)) * centered;
    }
    out.row(c) = dx;
  }
  return out;
}

Vec delta(const Mat& x) {
  Vec out(x.rows());
  const double n = static_cast<double>(x.cols());
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    const double peak = x.row(c).maxCoeff();
    out(c) = (peak - x.row(c).array()).sum() / n;
  }
  return out;
}

Mat delta_vjp(const Mat& x, const Vec& grad_out) {
  const double n = static_cast<double>(x.cols());
  Mat out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    Eigen::Index arg = 0;
    x.row(c).maxCoeff(&arg);  // first maximal index
    out.row(c).setConstant(-grad_out(c) / n);
    out(c, arg) += grad_out(c);
  }
  return out;
}

Mat first_interval_step(const Mat& a1, const ChannelAffine& p, double h, TtisMode mode,
                        double alpha) {
  check_channels(a1, p);
  const Mat forcing = mode == TtisMode::kTrainPerturbed ? perturb_spectrum(a1, alpha) : a1;
  Mat out = std::exp(h) * a1 - (h / 2.0) * (p.mixing * forcing);
  subtract_broadcast(out, p.shift, delta(forcing), h / 2.0);
  return out;
}

TtisState subsequent_interval_step(const TtisState& state, const ChannelAffine& p, double h,
                                   int n_intervals) {
  if (state.interval < 2 || state.interval > n_intervals)
    throw std::out_of_range("interval index " + std::to_string(state.interval) +
                            " outside [2, " + std::to_string(n_intervals) + "]");
  check_channels(state.current, p);
  const double grow = std::exp(h);
  const double shrink = std::exp(-h);
  const double scale = (h / 2.0) * grow;
  const Mat& cur = state.current;
  const Mat& prev = state.previous;

  Mat next = grow * cur - scale * (p.mixing * (shrink * cur + prev));
  subtract_broadcast(next, p.shift, shrink * delta(cur) + delta(prev), scale);
  return {std::move(next), cur, state.interval + 1};
}

Trajectory evolve(const Mat& a1, const ChannelAffine& p, const TimeGrid& grid, TtisMode mode,
                  double alpha, bool single_step) {
  grid.validate();
  Trajectory traj;
  traj.perturbed = mode == TtisMode::kTrainPerturbed;
  traj.alpha = alpha;
  traj.h = single_step ? grid.horizon() : grid.h;
  traj.forcing = traj.perturbed ? perturb_spectrum(a1, alpha) : a1;
  traj.states.reserve(static_cast<std::size_t>(single_step ? 2 : grid.n_intervals + 1));
  traj.states.push_back(a1);
  traj.states.push_back(first_interval_step(a1, p, traj.h, mode, alpha));
  if (single_step) return traj;

  // The t_0 initial value of the second interval is the input spectrum.
  TtisState state{traj.states[1], traj.states[0], 2};
  for (int i = 2; i <= grid.n_intervals; ++i) {
    state = subsequent_interval_step(state, p, grid.h, grid.n_intervals);
    traj.states.push_back(state.current);
  }
  return traj;
}

ChannelAffineGrad evolve_vjp(const Trajectory& traj, const ChannelAffine& p,
                             const Mat& grad_final) {
  const double h = traj.h;
  const auto n = static_cast<int>(traj.states.size()) - 1;
  const Mat mixing_t = p.mixing.transpose();
  const Vec shift = p.shift.col(0);

  std::vector<Mat> grads(traj.states.size(), Mat::Zero(grad_final.rows(), grad_final.cols()));
  grads.back() = grad_final;
  ChannelAffineGrad out{Mat(), Mat::Zero(p.mixing.rows(), p.mixing.cols()),
                        Mat::Zero(p.shift.rows(), 1)};

  const double grow = std::exp(h);
  const double shrink = std::exp(-h);
  const double scale = (h / 2.0) * grow;
  for (int i = n; i >= 2; --i) {
    const Mat& g = grads[static_cast<std::size_t>(i)];
    const Mat& cur = traj.states[static_cast<std::size_t>(i - 1)];
    const Mat& prev = traj.states[static_cast<std::size_t>(i - 2)];
    const Vec row_sums = g.rowwise().sum();
    const Vec d_delta = shift.cwiseProduct(row_sums);
    const Mat mixed_back = mixing_t * g;

    grads[static_cast<std::size_t>(i - 1)] +=
        grow * g - scale * shrink * (mixed_back + delta_vjp(cur, d_delta));
    grads[static_cast<std::size_t>(i - 2)] -= scale * (mixed_back + delta_vjp(prev, d_delta));
    out.mixing -= scale * g * (shrink * cur + prev).transpose();
    out.shift.col(0) -= scale * (shrink * delta(cur) + delta(prev)).cwiseProduct(row_sums);
  }

  const Mat& g1 = grads[1];
  const Vec row_sums = g1.rowwise().sum();
  const double half = h / 2.0;
  const Mat d_forcing = -half * (mixing_t * g1 + delta_vjp(traj.forcing, shift.cwiseProduct(row_sums)));
  out.mixing -= half * g1 * traj.forcing.transpose();
  out.shift.col(0) -= half * delta(traj.forcing).cwiseProduct(row_sums);

  out.input = grads[0] + grow * g1;
  out.input += traj.perturbed ? perturb_spectrum_vjp(traj.states[0], traj.alpha, d_forcing)
                              : d_forcing;
  return out;
}

TransformTrace transform_traced(const FeatureMap& f, const TtisParams& params,
                                const TtisOptions& options, Rng* rng) {
  params.validate();
  if (params.channels() != f.channels())
    throw ShapeError("feature map has " + std::to_string(f.channels()) +
                     " channels but TTIs parameters have " + std::to_string(params.channels()));

  TransformTrace trace;
  trace.input = f;
  trace.options = options;
  if (options.mode == TtisMode::kTrainPerturbed) {
    if (options.alpha) {
      trace.alpha = *options.alpha;
    } else {
      if (rng == nullptr) throw std::invalid_argument("perturbed transform needs a generator");
      trace.alpha = rng->uniform();
    }
  }

  const auto& grid = options.grid;
  if (options.spectral) {
    trace.spectrum = spectral::decompose(f);
    trace.amplitude = evolve(trace.spectrum.amplitude, params.amplitude, grid, options.mode,
                             trace.alpha, options.single_step);
    trace.phase = evolve(trace.spectrum.phase, params.phase, grid, options.mode, trace.alpha,
                         options.single_step);
    trace.output = spectral::reconstruct(
        {trace.amplitude.final(), trace.phase.final(), f.height(), f.width()});
  } else {
    trace.amplitude = evolve(f.planes(), params.amplitude, grid, options.mode, trace.alpha,
                             options.single_step);
    trace.output = FeatureMap(f.height(), f.width(), trace.amplitude.final());
  }
  if (!trace.output.all_finite())
    throw std::runtime_error("TTIs transform produced non-finite values");
  return trace;
}

FeatureMap transform(const FeatureMap& f, const TtisParams& params, const TtisOptions& options,
                     Rng* rng) {
  return transform_traced(f, params, options, rng).output;
}

TtisGrads transform_vjp(const TransformTrace& trace, const TtisParams& params,
                        const Mat& grad_output) {
  const int c = params.channels();
  TtisGrads out{Mat(), {{Mat::Zero(c, c), Mat::Zero(c, 1)}, {Mat::Zero(c, c), Mat::Zero(c, 1)}}};
  if (trace.options.spectral) {
    const int h = trace.input.height();
    const int w = trace.input.width();
    const auto g_spec = spectral::reconstruct_vjp(
        {trace.amplitude.final(), trace.phase.final(), h, w}, grad_output);
    auto ga = evolve_vjp(trace.amplitude, params.amplitude, g_spec.amplitude);
    auto gp = evolve_vjp(trace.phase, params.phase, g_spec.phase);
    out.input = spectral::decompose_vjp(trace.input, ga.input, gp.input);
    out.params.amplitude = {std::move(ga.mixing), std::move(ga.shift)};
    out.params.phase = {std::move(gp.mixing), std::move(gp.shift)};
  } else {
    auto ga = evolve_vjp(trace.amplitude, params.amplitude, grad_output);
    out.input = std::move(ga.input);
    out.params.amplitude = {std::move(ga.mixing), std::move(ga.shift)};
  }
  return out;
}

TransformWithGrad transform_with_grad(const FeatureMap& f, const TtisParams& params,
                                      const TtisOptions& options, Rng* rng,
                                      const Mat& grad_output) {
  auto trace = transform_traced(f, params, options, rng);
  if (grad_output.rows() != trace.output.planes().rows() ||
      grad_output.cols() != trace.output.planes().cols())
    throw ShapeError("upstream gradient shape does not match the transform output");
  auto grads = transform_vjp(trace, params, grad_output);
  return {std::move(trace.output), std::move(grads)};
}

}  // namespace fssti::ttis
