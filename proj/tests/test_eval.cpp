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
#include <sstream>

#include <Eigen/Eigenvalues>

#include "fssti/eval/metrics.hpp"
#include "fssti/eval/pca.hpp"
#include "fssti/eval/protocol.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

namespace fssti::eval {
namespace {

TEST(Iou, MatchesSetCountOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = oracle::random_mask(5, 7, rng, 0.4, false);
    const auto b = oracle::random_mask(5, 7, rng, 0.4, false);
    int inter = 0, uni = 0;
    for (int i = 0; i < 35; ++i) {
      inter += a.at(i) && b.at(i);
      uni += a.at(i) || b.at(i);
    }
    EXPECT_DOUBLE_EQ(iou(a, b), uni == 0 ? 1.0 : static_cast<double>(inter) / uni);
  }
}

TEST(Iou, Conventions) {
  BinaryMask a(2, 2), b(2, 2);
  EXPECT_EQ(iou(a, b), 1.0);
  a.set(0, 0, true);
  b.set(1, 1, true);
  EXPECT_EQ(iou(a, b), 0.0);
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_THROW(iou(a, BinaryMask(3, 2)), std::invalid_argument);
}

TEST(Upsample, RepeatsEveryCell) {
  BinaryMask m(1, 2);
  m.set(0, 1, true);
  const auto u = upsample(m, 3);
  EXPECT_EQ(u.height(), 3);
  EXPECT_EQ(u.width(), 6);
  EXPECT_EQ(u.count(), 9);
  EXPECT_EQ(u(2, 3), 1);
  EXPECT_EQ(u(2, 2), 0);
}

TEST(MeanStd, SampleAndPopulation) {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(mean_std(v, StdKind::kSample).first, 2.5);
  EXPECT_NEAR(mean_std(v, StdKind::kSample).second, std::sqrt(5.0 / 3.0), 1e-12);
  EXPECT_NEAR(mean_std(v, StdKind::kPopulation).second, std::sqrt(1.25), 1e-12);
  EXPECT_EQ(mean_std({0.3, 0.3, 0.3}, StdKind::kSample).second, 0.0);
}

TEST(Pca, MatchesDenseEigensolver) {
  Rng rng(2);
  std::vector<Vec> pts;
  Vec scales = Vec::LinSpaced(32, 3.0, 0.1);
  for (int i = 0; i < 200; ++i) {
    Vec v(32);
    for (int j = 0; j < 32; ++j) v(j) = scales(j) * rng.normal();
    pts.push_back(v);
  }
  const auto fit = pca_top2(pts);
  Mat x(200, 32);
  for (int i = 0; i < 200; ++i) x.row(i) = (pts[i] - fit.mean).transpose();
  const Mat cov = x.transpose() * x / 200.0;  // 1/n covariance
  Eigen::SelfAdjointEigenSolver<Mat> es(cov);
  const Mat top = es.eigenvectors().rightCols(2).rowwise().reverse();
  Mat ours(32, 2);
  ours << fit.components[0], fit.components[1];
  // Principal angles between the two 2-dim subspaces.
  const Eigen::JacobiSVD<Mat> svd(top.transpose() * ours);
  const double min_cos = svd.singularValues().minCoeff();
  EXPECT_LE(std::acos(std::min(1.0, min_cos)), 1e-4);
  EXPECT_GE(fit.variances[0], fit.variances[1]);
  EXPECT_NEAR(fit.variances[0], es.eigenvalues()(31), 1e-6 * es.eigenvalues()(31));
}

TEST(Pca, CollinearPointsHaveZeroSecondCoordinate) {
  std::vector<Vec> pts;
  const Vec dir = Vec::LinSpaced(5, 1.0, 2.0);
  for (int i = 0; i < 6; ++i) pts.push_back(0.7 * i * dir + Vec::Ones(5));
  const auto fit = pca_top2(pts);
  EXPECT_LE(fit.coordinates.col(1).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(std::abs(fit.components[0].dot(fit.components[1])), 0.0, 1e-9);
}

TEST(Pca, RejectsDegenerateInput) {
  EXPECT_THROW(pca_top2({Vec::Ones(3), Vec::Zero(3)}), std::invalid_argument);
  EXPECT_THROW(pca_top2({Vec::Ones(3), Vec::Ones(3), Vec::Ones(3)}), std::invalid_argument);
}

TEST(Pca, ExportWritesHeaderAndRows) {
  test::TempDir dir;
  Rng rng(3);
  std::vector<Vec> pts;
  for (int i = 0; i < 4; ++i) pts.push_back(oracle::random_mat(3, 1, rng));
  pca_export(pts, {"a", "b", "c", "d"}, dir / "p.csv");
  std::ifstream in(dir / "p.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "label,pc1,pc2");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4);
}

class Protocol : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    episodes::SynthSpec spec;
    spec.image_size = 32;
    spec.images_per_category = 6;
    spec.seed = 2;
    data_ = new episodes::Dataset(episodes::generate_dataset(spec));
    Rng rng(4);
    model_ = new training::Model(training::initial_model(8, rng));
  }
  static void TearDownTestSuite() {
    delete data_;
    delete model_;
  }
  static ProtocolConfig config(std::vector<std::uint64_t> seeds) {
    ProtocolConfig c;
    c.finetune.iterations = 5;
    c.finetune.learning_rate = training::kDefaultLrFinetune;
    c.finetune.pipeline.reg_form = training::RegForm::kAbsolute;
    c.seeds = std::move(seeds);
    c.threads = 2;
    return c;
  }
  static episodes::Dataset* data_;
  static training::Model* model_;
};
episodes::Dataset* Protocol::data_ = nullptr;
training::Model* Protocol::model_ = nullptr;

TEST_F(Protocol, IdenticalSeedsGiveZeroStd) {
  const auto r = repeated_eval(*data_, *model_, config({7, 7, 7}));
  EXPECT_EQ(r.std, 0.0);
  EXPECT_EQ(r.per_run_miou()[0], r.per_run_miou()[2]);
}

TEST_F(Protocol, AuditIsCleanAndRunsMatchSingleReplay) {
  const auto cfg = config({1, 2, 3});
  const auto r = repeated_eval(*data_, *model_, cfg);
  for (const auto& run : r.runs) {
    EXPECT_TRUE(run.audit.clean());
    EXPECT_GT(run.audit.finetune_reads, 0u);
    EXPECT_EQ(run.audit.eval_queries, 3u * 5u);
    EXPECT_GE(run.report.miou, 0.0);
    EXPECT_LE(run.report.miou, 1.0);
  }
  const auto replay = run_once(*data_, *model_, cfg, 2);
  EXPECT_EQ(replay.report.miou, r.runs[1].report.miou);
  EXPECT_EQ(replay.report.pool_ids, r.runs[1].report.pool_ids);
}

TEST_F(Protocol, ReportJsonRoundTrips) {
  auto r = repeated_eval(*data_, *model_, config({1, 2}));
  r.config_json = R"({"seed":0})";
  const auto back = report_from_json(report_to_json(r));
  EXPECT_EQ(back.seeds, r.seeds);
  EXPECT_EQ(back.per_run_miou(), r.per_run_miou());
  EXPECT_EQ(back.mean, r.mean);
  EXPECT_EQ(back.std, r.std);
  EXPECT_EQ(back.per_category, r.per_category);
  EXPECT_EQ(back.config_json, r.config_json);
}

TEST_F(Protocol, EvaluateRejectsOverlapAndEmptyTestSets) {
  Rng rng(1);
  auto split = episodes::make_strict_split(*data_, 1, rng);
  const training::PipelineConfig pc;
  EXPECT_THROW(evaluate(*model_, split.pool, episodes::TestSet({}), pc), std::logic_error);
  std::map<int, std::vector<const episodes::Sample*>> leaky;
  for (int cat : split.pool.categories())
    leaky[cat] = {&split.pool.support(cat, 0, episodes::AccessPhase::kEvalSupport, nullptr)};
  EXPECT_THROW(evaluate(*model_, split.pool, episodes::TestSet(leaky), pc), std::logic_error);
}

TEST_F(Protocol, QueryEqualToSupportScoresHighAtFullResolution) {
  // Self-consistency: a stride-1 projection backbone keeps image resolution,
  // so with the support as its own query the pipeline recovers the shape.
  const training::Model model{backbone::Backbone::projection(3), ttis::TtisParams::identity(3)};
  const training::PipelineConfig pc;
  for (int cat : data_->categories(episodes::Domain::kTarget)) {
    const auto& s = data_->samples()[data_->category_indices(cat)[0]];
    const training::LabeledImage shot{&s.image, &s.mask};
    const auto r = training::predict(model, std::span(&shot, 1), s.image, pc);
    EXPECT_GE(iou(r.mask, s.mask), 0.9) << "category " << cat;
  }
}

TEST_F(Protocol, AblationCsvHasOneRowPerVariantPlusSourceOnly) {
  AblationConfig ac;
  ac.source.iterations = 3;
  ac.source.pipeline.reg_form = training::RegForm::kAbsolute;
  ac.protocol = config({1, 2});
  ac.variants = {training::Variant::parse("full"), training::Variant::parse("no-ode")};
  ac.channels = 8;
  const auto rows = ablation_suite(*data_, ac);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[2].label, kSourceOnlyLabel);
  for (const auto& row : rows) EXPECT_EQ(row.report.seeds, (std::vector<std::uint64_t>{1, 2}));
  const auto csv = ablation_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "variant,label,mean,std,runs");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

}  // namespace
}  // namespace fssti::eval
