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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fssti/eval/metrics.hpp"
#include "fssti/training/train.hpp"

namespace fssti::eval {

/// Counts from one run's access log.
struct AuditSummary {
  std::size_t finetune_reads = 0;
  std::size_t finetune_outside_pool = 0;  // fine-tune reads of non-pool ids
  std::size_t finetune_test_reads = 0;    // fine-tune reads of test-set ids
  std::size_t eval_queries = 0;
  std::size_t eval_queries_in_pool = 0;   // pool ids scored as queries

  bool clean() const {
    return finetune_outside_pool == 0 && finetune_test_reads == 0 && eval_queries_in_pool == 0;
  }
};

AuditSummary summarize(const episodes::AccessAudit& audit, const episodes::FinetunePool& pool,
                       const episodes::TestSet& test);

enum class StdKind { kSample, kPopulation };

struct ProtocolConfig {
  training::TrainConfig finetune;  // seed is replaced per run
  std::vector<std::uint64_t> seeds;
  bool do_finetune = true;
  StdKind std_kind = StdKind::kSample;
  int threads = 1;
};

/// `count` consecutive seeds starting at `base`.
std::vector<std::uint64_t> default_seeds(std::uint64_t base, int count);

struct RunRecord {
  EvalReport report;
  AuditSummary audit;
};

struct RepeatedReport {
  std::vector<std::uint64_t> seeds;
  std::vector<RunRecord> runs;
  double mean = 0.0;
  double std = 0.0;
  std::map<int, double> per_category;  // mean over runs
  std::string config_json;             // resolved configuration echo

  std::vector<double> per_run_miou() const;
};

/// mean and std of `values` (std = 0 for fewer than two values in sample mode).
std::pair<double, double> mean_std(const std::vector<double>& values, StdKind kind);

/// Per seed: strict split -> optional fine-tune of a copy of `model` ->
/// evaluate. Runs are independent and may execute concurrently; results are
/// ordered as `config.seeds`.
RepeatedReport repeated_eval(const episodes::Dataset& dataset, const training::Model& model,
                             const ProtocolConfig& config);

/// The split used by repeated_eval for one seed.
episodes::StrictSplit split_for_seed(const episodes::Dataset& dataset, int k, std::uint64_t seed);
/// One protocol run; exposed so a single run can be replayed.
RunRecord run_once(const episodes::Dataset& dataset, const training::Model& model,
                   const ProtocolConfig& config, std::uint64_t seed);

/// Writes {"seeds", "per_run_miou", "mean", "std", "per_category", ...}.
std::string report_to_json(const RepeatedReport& report);
RepeatedReport report_from_json(const std::string& text);
void write_report(const RepeatedReport& report, const std::filesystem::path& path);

struct AblationRow {
  std::string variant;
  std::string label;
  RepeatedReport report;
};

struct AblationConfig {
  training::TrainConfig source;  // pipeline.variant is replaced per row
  ProtocolConfig protocol;
  std::vector<training::Variant> variants;
  /// Adds the source-trained full model evaluated without fine-tuning.
  bool source_only_row = true;
  int channels = 32;
  std::uint64_t init_seed = 0;
};

inline constexpr const char* kSourceOnlyLabel = "FSS-TIs (S.O.)";

/// Trains every variant from the same initialization, then runs the repeated
/// protocol on the same seeds.
std::vector<AblationRow> ablation_suite(const episodes::Dataset& dataset,
                                        const AblationConfig& config);

/// Header "variant,label,mean,std,runs"; means and stds in mIoU points.
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace fssti::eval
