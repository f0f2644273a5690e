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

#include "fssti/cli/gradcheck.hpp"

#include <algorithm>
#include <numeric>

#include "fssti/backbone/backbone.hpp"
#include "fssti/episodes/synth.hpp"
#include "fssti/fewshot/fewshot.hpp"
#include "fssti/spectral/spectral.hpp"
#include "fssti/training/pipeline.hpp"
#include "fssti/ttis/ttis.hpp"

namespace fssti::cli {

bool GradcheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed(); });
}

std::optional<GradcheckEntry> GradcheckReport::first_failure() const {
  for (const auto& e : entries)
    if (!e.passed()) return e;
  return std::nullopt;
}

double relative_error(const Mat& analytic, const Mat& numeric) {
  const double scale = std::max({analytic.norm(), numeric.norm(), 1e-12});
  return (analytic - numeric).norm() / scale;
}

FiniteDifference central_difference(const std::function<double(const Mat&)>& f, const Mat& x,
                                    const Mat& analytic, double eps, int max_entries, Rng& rng) {
  if (analytic.rows() != x.rows() || analytic.cols() != x.cols())
    throw ShapeError("analytic gradient shape differs from the probed tensor");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(x.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  if (max_entries > 0 && idx.size() > static_cast<std::size_t>(max_entries)) {
    rng.shuffle(idx);
    idx.resize(static_cast<std::size_t>(max_entries));
  }
  FiniteDifference out{Mat::Zero(x.rows(), x.cols()), Mat::Zero(x.rows(), x.cols())};
  Mat probe = x;
  for (const auto i : idx) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + eps;
    const double up = f(probe);
    probe.data()[i] = orig - eps;
    const double down = f(probe);
    probe.data()[i] = orig;
    out.numeric.data()[i] = (up - down) / (2.0 * eps);
    out.analytic.data()[i] = analytic.data()[i];
  }
  return out;
}

namespace {

constexpr double kEps = 1e-6;

Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

double inner(const Mat& a, const Mat& b) { return a.cwiseProduct(b).sum(); }

ttis::TtisParams random_params(int c, Rng& rng) {
  ttis::TtisParams p;
  p.amplitude.mixing = Mat::Identity(c, c) + random_mat(c, c, rng, 0.1);
  p.amplitude.shift = random_mat(c, 1, rng, 0.1);
  p.phase.mixing = Mat::Identity(c, c) + random_mat(c, c, rng, 0.1);
  p.phase.shift = random_mat(c, 1, rng, 0.1);
  return p;
}

class Checker {
 public:
  Checker(const GradcheckOptions& options, GradcheckReport& report)
      : options_(options), report_(report), probe_rng_(Rng(options.seed).split(99)) {}

  void check(const std::string& suite, const std::string& name, const Mat& x, Mat analytic,
             const std::function<double(const Mat&)>& f, double tolerance,
             int max_entries = 0) {
    if (name == options_.flip_sign_of) analytic = -analytic;
    const auto fd = central_difference(f, x, analytic, kEps, max_entries, probe_rng_);
    report_.entries.push_back({suite, name, relative_error(fd.analytic, fd.numeric), tolerance});
  }

 private:
  const GradcheckOptions& options_;
  GradcheckReport& report_;
  Rng probe_rng_;
};

void spectral_suite(Checker& ck, Rng& rng) {
  const int c = 3, h = 5, w = 6;
  const FeatureMap x(h, w, random_mat(c, h * w, rng));
  const Mat ga = random_mat(c, h * w, rng);
  const Mat gp = random_mat(c, h * w, rng);
  const auto loss = [&](const Mat& planes) {
    const auto s = spectral::decompose(FeatureMap(h, w, planes));
    return inner(ga, s.amplitude) + inner(gp, s.phase);
  };
  ck.check("spectral", "decompose.input", x.planes(), spectral::decompose_vjp(x, ga, gp), loss,
           kIsolatedTolerance);

  const Mat amp = random_mat(c, h * w, rng).cwiseAbs();
  const Mat phase = random_mat(c, h * w, rng);
  const Mat g = random_mat(c, h * w, rng);
  const auto grads = spectral::reconstruct_vjp({amp, phase, h, w}, g);
  ck.check("spectral", "reconstruct.amplitude", amp, grads.amplitude,
           [&](const Mat& a) { return inner(g, spectral::reconstruct({a, phase, h, w}).planes()); },
           kIsolatedTolerance);
  ck.check("spectral", "reconstruct.phase", phase, grads.phase,
           [&](const Mat& p) { return inner(g, spectral::reconstruct({amp, p, h, w}).planes()); },
           kIsolatedTolerance);
}

void ttis_suite(Checker& ck, Rng& rng, const std::string& suite, bool spectral_mode,
                bool single_step) {
  const int c = 4, h = 6, w = 6;
  const auto params = random_params(c, rng);
  const FeatureMap x(h, w, random_mat(c, h * w, rng));
  ttis::TtisOptions opt;
  opt.mode = ttis::TtisMode::kTrainPerturbed;
  opt.alpha = 0.3;
  opt.spectral = spectral_mode;
  opt.single_step = single_step;
  const Mat g = random_mat(c, h * w, rng);
  const auto res = ttis::transform_with_grad(x, params, opt, nullptr, g);
  const auto run = [&](const FeatureMap& f, const ttis::TtisParams& p) {
    return inner(g, ttis::transform(f, p, opt, nullptr).planes());
  };
  ck.check(suite, "ttis.input", x.planes(), res.grads.input,
           [&](const Mat& m) { return run(FeatureMap(h, w, m), params); }, kIsolatedTolerance);
  const auto param_check = [&](const std::string& name, const Mat& value, const Mat& grad,
                               auto setter) {
    ck.check(suite, name, value, grad,
             [&](const Mat& m) {
               auto p = params;
               setter(p, m);
               return run(x, p);
             },
             kIsolatedTolerance);
  };
  param_check("ttis.amplitude.mixing", params.amplitude.mixing, res.grads.params.amplitude.mixing,
              [](ttis::TtisParams& p, const Mat& m) { p.amplitude.mixing = m; });
  param_check("ttis.amplitude.shift", params.amplitude.shift, res.grads.params.amplitude.shift,
              [](ttis::TtisParams& p, const Mat& m) { p.amplitude.shift = m; });
  if (spectral_mode) {
    param_check("ttis.phase.mixing", params.phase.mixing, res.grads.params.phase.mixing,
                [](ttis::TtisParams& p, const Mat& m) { p.phase.mixing = m; });
    param_check("ttis.phase.shift", params.phase.shift, res.grads.params.phase.shift,
                [](ttis::TtisParams& p, const Mat& m) { p.phase.shift = m; });
  }

  const Mat spec = random_mat(c, h * w, rng);
  const Mat gs = random_mat(c, h * w, rng);
  ck.check(suite, "perturb.input", spec, ttis::perturb_spectrum_vjp(spec, 0.3, gs),
           [&](const Mat& m) { return inner(gs, ttis::perturb_spectrum(m, 0.3)); },
           kIsolatedTolerance);
  const Vec gd = random_mat(c, 1, rng).col(0);
  ck.check(suite, "delta.input", spec, ttis::delta_vjp(spec, gd),
           [&](const Mat& m) { return gd.dot(ttis::delta(m)); }, kIsolatedTolerance);
}

void fewshot_suite(Checker& ck, Rng& rng) {
  namespace k = fewshot::kernels;
  const int c = 5, n = 12;
  const Mat f = random_mat(c, n, rng);
  RowVec weights(n);
  for (int i = 0; i < n; ++i) weights[i] = i % 3 == 0 ? 1.0 : 0.0;
  const Vec gm = random_mat(c, 1, rng).col(0);
  ck.check("fewshot", "masked_mean.features", f, k::masked_mean_vjp(weights, gm, c),
           [&](const Mat& m) { return gm.dot(k::masked_mean(m, weights)); }, kIsolatedTolerance);

  const RowVec gc = random_mat(1, n, rng).row(0);
  for (const Eigen::Index pcols : {Eigen::Index{1}, Eigen::Index{n}}) {
    const Mat p = random_mat(c, pcols, rng);
    const auto g = k::cosine_columns_vjp(p, f, gc);
    const std::string tag = pcols == 1 ? "cosine(prototype)" : "cosine(map)";
    ck.check("fewshot", tag + ".p", p, g.p,
             [&](const Mat& m) { return gc.dot(k::cosine_columns(m, f)); }, kIsolatedTolerance);
    ck.check("fewshot", tag + ".q", f, g.q,
             [&](const Mat& m) { return gc.dot(k::cosine_columns(p, m)); }, kIsolatedTolerance);
  }

  const std::vector<int> bg{1, 2, 4, 7, 11};
  const Mat q = random_mat(c, n, rng, 0.5);
  const Mat ga = random_mat(c, n, rng);
  ck.check("fewshot", "adaptive_background.query", q, k::adaptive_background_vjp(q, bg, ga),
           [&](const Mat& m) { return inner(ga, k::adaptive_background(m, bg)); },
           kIsolatedTolerance);
}

void loss_suite(Checker& ck, Rng& rng) {
  namespace k = training::kernels;
  const int n = 16;
  const RowVec fg = random_mat(1, n, rng, 0.5).row(0);
  const RowVec bg = random_mat(1, n, rng, 0.5).row(0);
  RowVec mask(n);
  for (int i = 0; i < n; ++i) mask[i] = rng.uniform_index(2) == 1 ? 1.0 : 0.0;
  const auto g = k::bce_vjp(fg, bg, mask, training::kDefaultTemperature, 1.0);
  ck.check("losses", "bce.fg", fg, g.fg,
           [&](const Mat& m) { return k::bce(m.row(0), bg, mask, training::kDefaultTemperature); },
           kIsolatedTolerance);
  ck.check("losses", "bce.bg", bg, g.bg,
           [&](const Mat& m) { return k::bce(fg, m.row(0), mask, training::kDefaultTemperature); },
           kIsolatedTolerance);

  const auto params = random_params(4, rng);
  for (const auto form : {training::RegForm::kSigned, training::RegForm::kAbsolute}) {
    const std::string tag = form == training::RegForm::kSigned ? "reg(signed)" : "reg(absolute)";
    const auto grads = training::reg_loss_grad(params, form);
    const auto eval = [&](auto setter) {
      return [&, setter](const Mat& m) {
        auto p = params;
        setter(p, m);
        return training::reg_loss(p, form);
      };
    };
    ck.check("losses", tag + ".amplitude.mixing", params.amplitude.mixing, grads.amplitude.mixing,
             eval([](ttis::TtisParams& p, const Mat& m) { p.amplitude.mixing = m; }),
             kIsolatedTolerance);
    ck.check("losses", tag + ".amplitude.shift", params.amplitude.shift, grads.amplitude.shift,
             eval([](ttis::TtisParams& p, const Mat& m) { p.amplitude.shift = m; }),
             kIsolatedTolerance);
    ck.check("losses", tag + ".phase.mixing", params.phase.mixing, grads.phase.mixing,
             eval([](ttis::TtisParams& p, const Mat& m) { p.phase.mixing = m; }),
             kIsolatedTolerance);
    ck.check("losses", tag + ".phase.shift", params.phase.shift, grads.phase.shift,
             eval([](ttis::TtisParams& p, const Mat& m) { p.phase.shift = m; }),
             kIsolatedTolerance);
  }
}

void backbone_suite(Checker& ck, Rng& rng) {
  auto bb = backbone::Backbone::conv_stack(8, rng);
  for (auto& l : bb.layers()) l.bias = random_mat(l.bias.rows(), 1, rng, 0.1);
  Mat pixels(3, 64);
  for (Eigen::Index i = 0; i < pixels.size(); ++i) pixels.data()[i] = rng.uniform();
  const FeatureMap image(8, 8, pixels);
  const Mat g = random_mat(8, 1, rng);

  ad::Tape tape;
  const auto vars = bb.bind(tape);
  const auto out = bb.forward(tape, vars, image);
  const Mat gout = g.replicate(1, tape.value(out).cols());
  const auto loss = tape.record(Mat::Constant(1, 1, inner(gout, tape.value(out))), {out},
                                [out, gout](ad::Tape& t, const Mat& gr) {
                                  t.accumulate(out, gr(0, 0) * gout);
                                });
  tape.backward(loss);
  for (std::size_t i = 0; i < bb.layers().size(); ++i) {
    const auto eval = [&, i](bool weight) {
      return [&, i, weight](const Mat& m) {
        auto copy = bb;
        (weight ? copy.layers()[i].weight : copy.layers()[i].bias) = m;
        return inner(gout, copy.extract(image).planes());
      };
    };
    const std::string prefix = "backbone." + std::to_string(i);
    ck.check("backbone", prefix + ".weight", bb.layers()[i].weight, tape.grad(vars.weights[i]),
             eval(true), kIsolatedTolerance, 64);
    ck.check("backbone", prefix + ".bias", bb.layers()[i].bias, tape.grad(vars.biases[i]),
             eval(false), kIsolatedTolerance);
  }
}

void composed_suite(Checker& ck, Rng& rng, std::uint64_t seed) {
  episodes::SynthSpec spec;
  spec.image_size = 32;
  spec.images_per_category = 3;
  spec.seed = seed;
  const auto data = episodes::generate_dataset(spec);
  const auto& s = data.samples();
  const std::vector<training::LabeledImage> supports{{&s[0].image, &s[0].mask},
                                                     {&s[1].image, &s[1].mask}};
  const training::LabeledImage query{&s[2].image, &s[2].mask};

  training::Model model{backbone::Backbone::conv_stack(8, rng), random_params(8, rng)};
  training::PipelineConfig cfg;
  cfg.reg_form = training::RegForm::kSigned;
  const Rng loss_rng = rng.split(7);
  const auto total = [&](const training::Model& m) {
    Rng r = loss_rng;
    return training::episode_loss(supports, query, m, cfg, r).loss.total;
  };
  Rng r = loss_rng;
  const auto res = training::episode_loss(supports, query, model, cfg, r);
  for (auto& p : model.named_parameters()) {
    const bool last_layer = p.name.rfind("backbone.2", 0) == 0;
    if (p.name.rfind("backbone.", 0) == 0 && !last_layer) continue;
    Mat* slot = p.value;
    const Mat value = *slot;
    ck.check("composed", p.name, value, res.grads.at(p.name),
             [&, slot](const Mat& m) {
               const Mat saved = *slot;
               *slot = m;
               const double v = total(model);
               *slot = saved;
               return v;
             },
             kComposedTolerance, 48);
  }
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  GradcheckReport report;
  Checker ck(options, report);
  const Rng root(options.seed);
  Rng r1 = root.split(1), r2 = root.split(2), r3 = root.split(3), r4 = root.split(4),
      r5 = root.split(5), r6 = root.split(6), r7 = root.split(7), r8 = root.split(8);
  spectral_suite(ck, r1);
  ttis_suite(ck, r2, "ttis", true, false);
  ttis_suite(ck, r3, "ttis(no-ode)", true, true);
  ttis_suite(ck, r4, "ttis(no-fft)", false, false);
  fewshot_suite(ck, r5);
  loss_suite(ck, r6);
  backbone_suite(ck, r7);
  composed_suite(ck, r8, options.seed);
  return report;
}

}  // namespace fssti::cli
