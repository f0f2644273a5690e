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
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fssti/core/io.hpp"
#include "fssti/core/parallel.hpp"
#include "fssti/core/rng.hpp"
#include "fssti/core/tensor.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

namespace fssti {
namespace {

TEST(FeatureMap, RejectsNonPositiveDimensions) {
  EXPECT_THROW(FeatureMap(0, 2, 2), ShapeError);
  EXPECT_THROW(FeatureMap(2, 2, Mat(Mat::Zero(3, 5))), ShapeError);
}

TEST(FeatureMap, IndexingIsChannelThenRowMajor) {
  FeatureMap f(2, 3, 4);
  f(1, 2, 3) = 7.0;
  EXPECT_EQ(f.planes()(1, 2 * 4 + 3), 7.0);
}

TEST(BinaryMask, DownsampleUsesHalfOrMoreRule) {
  BinaryMask m(4, 4);
  m.set(0, 0, true);
  m.set(0, 1, true);  // top-left block: 2 of 4 on
  m.set(2, 2, true);  // bottom-right block: 1 of 4 on
  const auto d = m.downsample(2);
  EXPECT_EQ(d(0, 0), 1);
  EXPECT_EQ(d(1, 1), 0);
  EXPECT_EQ(d.count(), 1);
}

TEST(BinaryMask, ComplementPartitionsPositions) {
  Rng rng(3);
  const auto m = oracle::random_mask(7, 5, rng);
  EXPECT_EQ(m.count() + m.complement().count(), m.area());
  EXPECT_EQ(m.as_weights().sum(), m.count());
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_EQ(a.draws(), 100u);
}

TEST(Rng, SplitDependsOnSeedNotPosition) {
  Rng a(9);
  const auto fresh = a.split(4).next_u64();
  a.next_u64();
  EXPECT_EQ(a.split(4).next_u64(), fresh);
  EXPECT_NE(a.split(5).next_u64(), fresh);
}

TEST(Rng, UniformIndexPassesChiSquare) {
  // 10 bins, 100000 draws: the 0.999 quantile of chi^2 with 9 dof is 27.88.
  Rng rng(123);
  constexpr int kBins = 10;
  constexpr int kDraws = 100000;
  std::array<int, kBins> counts{};
  for (int i = 0; i < kDraws; ++i) ++counts[rng.uniform_index(kBins)];
  double chi2 = 0.0;
  const double expected = static_cast<double>(kDraws) / kBins;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 27.88);
}

TEST(Rng, UniformStaysInHalfOpenInterval) {
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, NormalHasUnitMoments) {
  Rng rng(77);
  constexpr int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng rng(1);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  rng.shuffle(v);
  EXPECT_EQ(std::set<int>(v.begin(), v.end()).size(), 8u);
}

TEST(FeatureFile, RoundTripsBitExactlyForFloatValues) {
  test::TempDir dir;
  Rng rng(2);
  FeatureMap f = oracle::random_feature(3, 5, 4, rng);
  f.planes() = f.planes().cast<float>().cast<double>();
  write_feature_file(f, dir / "a.ftns");
  EXPECT_EQ(read_feature_file(dir / "a.ftns"), f);
}

TEST(FeatureFile, HeaderIsLittleEndian) {
  test::TempDir dir;
  write_feature_file(FeatureMap(2, 1, 3), dir / "h.ftns");
  std::ifstream in(dir / "h.ftns", std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  ASSERT_EQ(bytes.size(), 4u + 16u + 6u * 4u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FTNS");
  const std::vector<unsigned char> header(bytes.begin() + 4, bytes.begin() + 20);
  EXPECT_EQ(header, (std::vector<unsigned char>{1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 3, 0, 0, 0}));
}

TEST(FeatureFile, ReportsEachMalformation) {
  test::TempDir dir;
  const auto expect_kind = [&](const std::string& bytes, FormatErrorKind kind) {
    std::ofstream(dir / "bad.ftns", std::ios::binary) << bytes;
    try {
      read_feature_file(dir / "bad.ftns");
      ADD_FAILURE() << "no error for kind " << to_string(kind);
    } catch (const FormatError& e) {
      EXPECT_EQ(e.kind(), kind) << e.what();
    }
  };
  expect_kind("XXXX", FormatErrorKind::kBadMagic);
  expect_kind(std::string("FTNS\x02\0\0\0", 8), FormatErrorKind::kBadVersion);
  expect_kind(std::string("FTNS\x01\0\0\0\x01\0\0\0\x01\0\0\0\x02\0\0\0\0\0", 22),
              FormatErrorKind::kTruncated);
  expect_kind(std::string("FTNS\x01\0\0\0\0\0\0\0\x01\0\0\0\x01\0\0\0", 20),
              FormatErrorKind::kBadShape);
  const float nan = std::nanf("");
  std::string payload("FTNS\x01\0\0\0\x01\0\0\0\x01\0\0\0\x01\0\0\0", 20);
  payload.append(reinterpret_cast<const char*>(&nan), 4);
  expect_kind(payload, FormatErrorKind::kNonFinite);
}

TEST(FeatureFile, MissingFileIsIoError) {
  EXPECT_THROW(read_feature_file("/nonexistent/x.ftns"), IoError);
}

TEST(MaskFile, RoundTripsAndRejectsNonBinary) {
  test::TempDir dir;
  Rng rng(8);
  const auto m = oracle::random_mask(6, 9, rng);
  write_mask_file(m, dir / "m.fmsk");
  EXPECT_EQ(read_mask_file(dir / "m.fmsk"), m);

  std::ofstream(dir / "bad.fmsk", std::ios::binary)
      << std::string("FMSK\x01\0\0\0\x01\0\0\0\x02\0\0\0\x01\x02", 18);
  try {
    read_mask_file(dir / "bad.fmsk");
    ADD_FAILURE() << "accepted mask value 2";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.kind(), FormatErrorKind::kInvalidMask);
  }
}

TEST(Parallel, VisitsEveryIndexOnceAndRethrows) {
  std::vector<std::atomic<int>> hits(50);
  parallel_for(50, 4, [&](std::size_t i) { ++hits[i]; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 7) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

}  // namespace
}  // namespace fssti
