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

#include "fssti/episodes/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "fssti/backbone/external.hpp"
#include "fssti/core/io.hpp"
#include "fssti/core/rng.hpp"
#include "fssti/spectral/fft.hpp"

namespace fssti::episodes {

const char* to_string(Shape s) {
  switch (s) {
    case Shape::kDisk: return "disk";
    case Shape::kSquare: return "square";
    case Shape::kTriangle: return "triangle";
    case Shape::kRing: return "ring";
    case Shape::kCross: return "cross";
    case Shape::kBar: return "bar";
  }
  return "unknown";
}

DomainStyle DomainStyle::source() { return {}; }

DomainStyle DomainStyle::target() {
  DomainStyle s;
  s.gain = {0.7, 1.2, 0.9};
  s.bias = {-0.05, 0.1, 0.2};
  s.low_frequency_boost = 1.8;
  s.noise = 0.06;
  return s;
}

void SynthSpec::validate() const {
  if (image_size < 8 || image_size % 8 != 0)
    throw std::invalid_argument("image size must be a positive multiple of 8, got " +
                                std::to_string(image_size));
  if (images_per_category < 2) throw std::invalid_argument("need at least 2 images per category");
  if (feature_stride < 1 || image_size % feature_stride != 0)
    throw std::invalid_argument("feature stride must divide the image size");
  std::set<int> src(source_categories.begin(), source_categories.end());
  for (int c : target_categories)
    if (src.count(c)) throw std::invalid_argument("source and target categories overlap");
  for (const auto* cats : {&source_categories, &target_categories})
    for (int c : *cats)
      if (c < 0 || c >= kNumShapes)
        throw std::invalid_argument("category id " + std::to_string(c) + " out of range");
  const auto differs = [](const DomainStyle& a, const DomainStyle& b) {
    return a.gain != b.gain && a.bias != b.bias && a.low_frequency_boost != b.low_frequency_boost &&
           a.noise != b.noise;
  };
  if (!differs(source_style, target_style))
    throw std::invalid_argument("source and target styles must differ in every knob");
}

Dataset::Dataset(std::vector<Sample> samples) : samples_(std::move(samples)) {
  std::set<std::string> ids;
  for (const auto& s : samples_)
    if (!ids.insert(s.id).second) throw std::invalid_argument("duplicate sample id '" + s.id + "'");
}

const Sample& Dataset::by_id(const std::string& id) const {
  for (const auto& s : samples_)
    if (s.id == id) return s;
  throw std::out_of_range("no sample with id '" + id + "'");
}

std::vector<std::size_t> Dataset::category_indices(int category) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples_.size(); ++i)
    if (samples_[i].category == category) out.push_back(i);
  return out;
}

std::vector<int> Dataset::categories(Domain domain) const {
  std::set<int> cats;
  for (const auto& s : samples_)
    if (s.domain == domain) cats.insert(s.category);
  return {cats.begin(), cats.end()};
}

Mat boost_low_frequencies(const Mat& planes, int h, int w, double boost, double fraction) {
  if (boost == 1.0) return planes;
  // Radial frequency of every bin, with wrap-around indices folded to |k|.
  std::vector<std::pair<double, int>> radii;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (y == 0 && x == 0) continue;
      const double fy = static_cast<double>(std::min(y, h - y)) / h;
      const double fx = static_cast<double>(std::min(x, w - x)) / w;
      radii.push_back({std::hypot(fy, fx), y * w + x});
    }
  std::stable_sort(radii.begin(), radii.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  const auto count = static_cast<std::size_t>(std::floor(fraction * radii.size()));
  // Bins tied with the cutoff radius are included so the selection stays
  // symmetric under k -> -k and the output stays real.
  const double cutoff = count == 0 ? -1.0 : radii[count - 1].first;
  auto spectrum = spectral::fft2(planes, h, w);
  for (const auto& [r, idx] : radii) {
    if (r > cutoff) break;
    spectrum.col(idx) *= boost;
  }
  return spectral::ifft2(spectrum, h, w).real();
}

namespace {

constexpr std::array<std::array<double, 3>, kNumShapes> kPalette{{
    {0.85, 0.25, 0.20},
    {0.20, 0.70, 0.30},
    {0.25, 0.35, 0.85},
    {0.90, 0.80, 0.20},
    {0.70, 0.30, 0.80},
    {0.20, 0.80, 0.80},
}};

struct Placement {
  double cy, cx, size;
  bool vertical;
};

bool inside(Shape shape, const Placement& p, double y, double x) {
  const double dy = y - p.cy;
  const double dx = x - p.cx;
  const double s = p.size;
  switch (shape) {
    case Shape::kDisk: return dy * dy + dx * dx <= s * s;
    case Shape::kSquare: return std::abs(dy) <= s && std::abs(dx) <= s;
    case Shape::kTriangle: {
      // Apex up, base at dy = s, apex at dy = -s.
      if (dy < -s || dy > s) return false;
      const double half = 0.5 * (dy + s);
      return std::abs(dx) <= half;
    }
    case Shape::kRing: {
      const double r2 = dy * dy + dx * dx;
      return r2 <= s * s && r2 >= 0.25 * s * s;
    }
    case Shape::kCross: {
      const double arm = 0.4 * s;
      return (std::abs(dy) <= arm && std::abs(dx) <= s) || (std::abs(dx) <= arm && std::abs(dy) <= s);
    }
    case Shape::kBar: {
      const double thick = 0.4 * s;
      const double along = p.vertical ? dy : dx;
      const double across = p.vertical ? dx : dy;
      return std::abs(along) <= s * 1.6 && std::abs(across) <= thick;
    }
  }
  return false;
}

struct RawImage {
  Mat pixels;  // 3 x (n*n)
  BinaryMask mask;
};

RawImage draw_image(int category, int n, Rng& rng) {
  const auto shape = static_cast<Shape>(category);
  Placement p{};
  p.size = rng.uniform(10.0, 20.0) * n / 64.0;
  const double margin = p.size * (shape == Shape::kBar ? 1.6 : 1.0);
  p.cy = rng.uniform(margin, std::max(margin, n - 1 - margin));
  p.cx = rng.uniform(margin, std::max(margin, n - 1 - margin));
  p.vertical = rng.uniform_index(2) == 1;

  std::array<double, 3> fg{};
  for (int c = 0; c < 3; ++c) fg[c] = kPalette[static_cast<std::size_t>(category)][c] + rng.uniform(-0.08, 0.08);
  std::array<double, 3> bg{};
  for (int attempt = 0;; ++attempt) {
    double dist2 = 0.0;
    for (int c = 0; c < 3; ++c) {
      bg[c] = rng.uniform(0.15, 0.85);
      dist2 += (bg[c] - fg[c]) * (bg[c] - fg[c]);
    }
    if (dist2 >= 0.09 || attempt > 64) break;
  }
  const double stripe_freq = (0.08 + 0.03 * category) * 2.0 * std::numbers::pi;
  const double stripe_angle = rng.uniform(0.0, std::numbers::pi);
  const double bg_freq = rng.uniform(0.01, 0.04) * 2.0 * std::numbers::pi;
  const double bg_angle = rng.uniform(0.0, std::numbers::pi);
  const double bg_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

  RawImage img{Mat(3, n * n), BinaryMask(n, n)};
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const bool on = inside(shape, p, y + 0.5, x + 0.5);
      img.mask.set(y, x, on);
      double tex;
      if (on)
        tex = 0.12 * std::sin(stripe_freq * (x * std::cos(stripe_angle) + y * std::sin(stripe_angle)));
      else
        tex = 0.10 * std::sin(bg_freq * (x * std::cos(bg_angle) + y * std::sin(bg_angle)) + bg_phase);
      for (int c = 0; c < 3; ++c) img.pixels(c, y * n + x) = (on ? fg[c] : bg[c]) + tex;
    }
  return img;
}

void apply_style(Mat& pixels, int n, const DomainStyle& style, Rng& rng) {
  for (int c = 0; c < 3; ++c)
    pixels.row(c) = (style.gain[static_cast<std::size_t>(c)] * pixels.row(c).array() +
                     style.bias[static_cast<std::size_t>(c)])
                        .matrix();
  pixels = boost_low_frequencies(pixels, n, n, style.low_frequency_boost);
  for (Eigen::Index i = 0; i < pixels.size(); ++i)
    pixels.data()[i] = std::clamp(pixels.data()[i] + style.noise * rng.normal(), 0.0, 1.0);
}

bool acceptable(const BinaryMask& mask, int stride) {
  const double frac = static_cast<double>(mask.count()) / mask.area();
  if (frac < 0.05 || frac > 0.6) return false;
  const auto small = mask.downsample(stride);
  return small.count() > 0 && small.count() < small.area();
}

}  // namespace

Dataset generate_dataset(const SynthSpec& spec) {
  spec.validate();
  const Rng root(spec.seed);
  std::vector<Sample> samples;
  const auto emit = [&](int category, Domain domain) {
    const DomainStyle& style = domain == Domain::kSource ? spec.source_style : spec.target_style;
    for (int i = 0; i < spec.images_per_category; ++i) {
      Rng rng = root.split(static_cast<std::uint64_t>(category) * 1'000'003ULL +
                           static_cast<std::uint64_t>(i));
      RawImage raw;
      for (int attempt = 0;; ++attempt) {
        raw = draw_image(category, spec.image_size, rng);
        if (acceptable(raw.mask, spec.feature_stride)) break;
        if (attempt > 1000)
          throw std::runtime_error("could not place an acceptable shape for category " +
                                   std::to_string(category));
      }
      apply_style(raw.pixels, spec.image_size, style, rng);
      // Images hold float-representable values so an exported copy is exact.
      raw.pixels = raw.pixels.cast<float>().cast<double>();
      Sample s;
      s.id = std::string(domain == Domain::kSource ? "s" : "t") + std::to_string(category) + "_" +
             std::to_string(i);
      s.category = category;
      s.domain = domain;
      s.image = FeatureMap(spec.image_size, spec.image_size, std::move(raw.pixels));
      s.mask = std::move(raw.mask);
      samples.push_back(std::move(s));
    }
  };
  for (int c : spec.source_categories) emit(c, Domain::kSource);
  for (int c : spec.target_categories) emit(c, Domain::kTarget);
  return Dataset(std::move(samples));
}

void export_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<backbone::ManifestEntry> entries;
  for (const auto& s : dataset.samples()) {
    const std::string image = s.id + ".ftns";
    const std::string mask = s.id + ".fmsk";
    write_feature_file(s.image, dir / image);
    write_mask_file(s.mask, dir / mask);
    entries.push_back({s.id, image, mask});
  }
  backbone::write_manifest(entries, dir / backbone::kManifestName);
}

Dataset import_dataset(const std::filesystem::path& dir) {
  const auto provider = backbone::load_external_features(dir);
  std::vector<Sample> samples;
  for (const auto& id : provider.ids()) {
    const auto us = id.find('_');
    if (id.size() < 4 || (id[0] != 's' && id[0] != 't') || us == std::string::npos)
      throw std::invalid_argument("dataset id '" + id + "' is not of the form <s|t><category>_<n>");
    Sample s;
    s.id = id;
    s.domain = id[0] == 's' ? Domain::kSource : Domain::kTarget;
    s.category = std::stoi(id.substr(1, us - 1));
    s.image = provider.features(id);
    s.mask = provider.mask(id);
    samples.push_back(std::move(s));
  }
  return Dataset(std::move(samples));
}

}  // namespace fssti::episodes
