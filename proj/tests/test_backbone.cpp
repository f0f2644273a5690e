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

#include <fstream>

#include "fssti/backbone/backbone.hpp"
#include "fssti/backbone/external.hpp"
#include "fssti/core/io.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

namespace fssti::backbone {
namespace {

// conv_forward is pre-activation; ReLU is applied by the layer stack.
TEST(Conv, MatchesDirectLoopOracle) {
  Rng rng(1);
  for (const auto& [k, stride, pad] : {std::tuple{3, 2, 1}, std::tuple{3, 1, 1}, std::tuple{1, 1, 0}}) {
    ConvLayer layer{oracle::random_mat(4, 3 * k * k, rng), oracle::random_mat(4, 1, rng), k, stride,
                    pad, true};
    const Mat input = oracle::random_mat(3, 9 * 7, rng);
    const Mat expect = oracle::conv(input, 9, 7, layer.weight, layer.bias, k, stride, pad, false);
    EXPECT_LE(oracle::max_abs(conv_forward(input, 9, 7, layer) - expect), 1e-12) << "k=" << k;
  }
}

TEST(Conv, Col2imIsAdjointOfIm2col) {
  Rng rng(2);
  const ConvLayer layer{Mat::Zero(1, 2 * 9), Mat::Zero(1, 1), 3, 2, 1, false};
  const Mat x = oracle::random_mat(2, 8 * 8, rng);
  const Mat cols = im2col(x, 8, 8, layer);
  const Mat y = oracle::random_mat(cols.rows(), cols.cols(), rng);
  const double lhs = (cols.array() * y.array()).sum();
  const double rhs = (x.array() * col2im(y, 2, 8, 8, layer).array()).sum();
  EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(ConvStack, HasStrideEightAndRequestedChannels) {
  Rng rng(3);
  const auto b = Backbone::conv_stack(16, rng);
  EXPECT_EQ(b.downsample_factor(), 8);
  EXPECT_EQ(b.in_channels(), 3);
  Rng img(4);
  const auto f = b.extract(oracle::random_feature(3, 32, 32, img, 0.0, 1.0));
  EXPECT_EQ(f.channels(), 16);
  EXPECT_EQ(f.height(), 4);
  EXPECT_EQ(f.width(), 4);
}

TEST(ConvStack, SameSeedSameWeights) {
  Rng a(5), b(5);
  EXPECT_EQ(Backbone::conv_stack(8, a).layers()[2].weight, Backbone::conv_stack(8, b).layers()[2].weight);
}

TEST(ConvStack, TrainableScopeFlags) {
  Rng rng(6);
  auto b = Backbone::conv_stack(8, rng);
  b.set_trainable(TrainableScope::kLastLayerOnly);
  EXPECT_FALSE(b.layer_trainable(0));
  EXPECT_TRUE(b.layer_trainable(2));
  for (const auto& p : b.named_parameters())
    EXPECT_EQ(p.trainable, p.name.rfind("backbone.2.", 0) == 0) << p.name;
}

TEST(Projection, StartsAsIdentity) {
  Rng rng(7);
  const auto f = oracle::random_feature(5, 3, 3, rng);
  EXPECT_EQ(Backbone::projection(5).extract(f), f);
}

TEST(Manifest, RoundTrips) {
  test::TempDir dir;
  const std::vector<ManifestEntry> entries{{"a", "a.ftns", "a.fmsk"}, {"b", "sub/b.ftns", "b.fmsk"}};
  write_manifest(entries, dir / "m.json");
  const auto back = read_manifest(dir / "m.json");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].id, "b");
  EXPECT_EQ(back[1].feature_path, "sub/b.ftns");
}

TEST(ExternalFeatures, LoadsRelativePathsAndNamesMissingIds) {
  test::TempDir dir;
  Rng rng(8);
  FeatureMap f = oracle::random_feature(4, 3, 3, rng);
  f.planes() = f.planes().cast<float>().cast<double>();
  const auto m = oracle::random_mask(3, 3, rng);
  write_feature_file(f, dir / "x.ftns");
  write_mask_file(m, dir / "x.fmsk");
  write_manifest({{"x", "x.ftns", "x.fmsk"}}, dir / kManifestName);
  const auto provider = load_external_features(dir.path());
  EXPECT_EQ(provider.features("x"), f);
  EXPECT_EQ(provider.mask("x"), m);
  EXPECT_EQ(provider.channels(), 4);

  write_manifest({{"x", "x.ftns", "x.fmsk"}, {"ghost", "ghost.ftns", "x.fmsk"}},
                 dir / kManifestName);
  try {
    load_external_features(dir.path());
    ADD_FAILURE() << "missing file accepted";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos) << e.what();
  }
}

TEST(ExternalFeatures, RejectsShapeMismatchAndDuplicates) {
  FeatureProvider p;
  p.add("a", FeatureMap(2, 3, 3), BinaryMask(3, 3));
  EXPECT_THROW(p.add("b", FeatureMap(3, 3, 3), BinaryMask(3, 3)), std::exception);
  EXPECT_THROW(p.add("a", FeatureMap(2, 3, 3), BinaryMask(3, 3)), std::exception);
}

}  // namespace
}  // namespace fssti::backbone
