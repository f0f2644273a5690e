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

#include "fssti/eval/protocol.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "fssti/core/parallel.hpp"

namespace fssti::eval {

using nlohmann::json;

AuditSummary summarize(const episodes::AccessAudit& audit, const episodes::FinetunePool& pool,
                       const episodes::TestSet& test) {
  using episodes::AccessPhase;
  AuditSummary s;
  const auto test_ids = test.ids();
  s.finetune_reads = audit.reads(AccessPhase::kFinetune);
  for (const auto& id : audit.ids(AccessPhase::kFinetune)) {
    if (!pool.ids().count(id)) ++s.finetune_outside_pool;
    if (test_ids.count(id)) ++s.finetune_test_reads;
  }
  s.eval_queries = audit.reads(AccessPhase::kEvalQuery);
  for (const auto& id : audit.ids(AccessPhase::kEvalQuery))
    if (pool.ids().count(id)) ++s.eval_queries_in_pool;
  return s;
}

std::vector<std::uint64_t> default_seeds(std::uint64_t base, int count) {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < count; ++i) out.push_back(base + static_cast<std::uint64_t>(i));
  return out;
}

std::vector<double> RepeatedReport::per_run_miou() const {
  std::vector<double> out;
  for (const auto& r : runs) out.push_back(r.report.miou);
  return out;
}

std::pair<double, double> mean_std(const std::vector<double>& values, StdKind kind) {
  if (values.empty()) throw std::invalid_argument("mean of no values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const auto n = static_cast<double>(values.size());
  const double denom = kind == StdKind::kSample ? n - 1.0 : n;
  return {mean, denom > 0.0 ? std::sqrt(ss / denom) : 0.0};
}

namespace {

// Stream of the split generator, distinct from the training streams.
constexpr std::uint64_t kSplitStream = 0x5b17;

}  // namespace

episodes::StrictSplit split_for_seed(const episodes::Dataset& dataset, int k, std::uint64_t seed) {
  Rng rng = Rng(seed).split(kSplitStream);
  return episodes::make_strict_split(dataset, k, rng);
}

RunRecord run_once(const episodes::Dataset& dataset, const training::Model& model,
                   const ProtocolConfig& config, std::uint64_t seed) {
  const auto split = split_for_seed(dataset, config.finetune.k, seed);
  episodes::AccessAudit audit;
  training::Model local = model;
  if (config.do_finetune) {
    auto ft = config.finetune;
    ft.seed = seed;
    training::finetune_target(split.pool, local, ft, &audit);
  }
  RunRecord rec;
  rec.report = evaluate(local, split.pool, split.test, config.finetune.pipeline, &audit);
  rec.report.seed = seed;
  rec.audit = summarize(audit, split.pool, split.test);
  return rec;
}

RepeatedReport repeated_eval(const episodes::Dataset& dataset, const training::Model& model,
                             const ProtocolConfig& config) {
  if (config.seeds.empty()) throw std::invalid_argument("repeated evaluation needs seeds");
  RepeatedReport out;
  out.seeds = config.seeds;
  out.runs.resize(config.seeds.size());
  parallel_for(config.seeds.size(), config.threads, [&](std::size_t i) {
    out.runs[i] = run_once(dataset, model, config, config.seeds[i]);
  });
  std::tie(out.mean, out.std) = mean_std(out.per_run_miou(), config.std_kind);
  std::map<int, std::vector<double>> by_cat;
  for (const auto& r : out.runs)
    for (const auto& [cat, v] : r.report.per_category) by_cat[cat].push_back(v);
  for (const auto& [cat, vs] : by_cat) out.per_category[cat] = mean_std(vs, config.std_kind).first;
  return out;
}

std::string report_to_json(const RepeatedReport& report) {
  json j;
  j["seeds"] = report.seeds;
  j["per_run_miou"] = report.per_run_miou();
  j["mean"] = report.mean;
  j["std"] = report.std;
  json per_cat = json::object();
  for (const auto& [cat, v] : report.per_category) per_cat[std::to_string(cat)] = v;
  j["per_category"] = per_cat;
  json runs = json::array();
  for (const auto& r : report.runs) {
    json run;
    run["seed"] = r.report.seed;
    run["k"] = r.report.k;
    run["miou"] = r.report.miou;
    json cats = json::object();
    for (const auto& [cat, v] : r.report.per_category) cats[std::to_string(cat)] = v;
    run["per_category"] = cats;
    run["pool_ids"] = r.report.pool_ids;
    run["audit"] = {{"finetune_reads", r.audit.finetune_reads},
                    {"finetune_outside_pool", r.audit.finetune_outside_pool},
                    {"finetune_test_reads", r.audit.finetune_test_reads},
                    {"eval_queries", r.audit.eval_queries},
                    {"eval_queries_in_pool", r.audit.eval_queries_in_pool}};
    runs.push_back(run);
  }
  j["runs"] = runs;
  j["config"] = report.config_json.empty() ? json::object() : json::parse(report.config_json);
  return j.dump(2);
}

RepeatedReport report_from_json(const std::string& text) {
  const json j = json::parse(text);
  RepeatedReport r;
  r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  r.mean = j.at("mean").get<double>();
  r.std = j.at("std").get<double>();
  for (const auto& [key, v] : j.at("per_category").items()) r.per_category[std::stoi(key)] = v.get<double>();
  const auto miou = j.at("per_run_miou").get<std::vector<double>>();
  if (j.contains("runs")) {
    for (const auto& run : j.at("runs")) {
      RunRecord rec;
      rec.report.seed = run.at("seed").get<std::uint64_t>();
      rec.report.k = run.at("k").get<int>();
      rec.report.miou = run.at("miou").get<double>();
      for (const auto& [key, v] : run.at("per_category").items())
        rec.report.per_category[std::stoi(key)] = v.get<double>();
      rec.report.pool_ids = run.at("pool_ids").get<std::vector<std::string>>();
      const auto& a = run.at("audit");
      rec.audit.finetune_reads = a.at("finetune_reads").get<std::size_t>();
      rec.audit.finetune_outside_pool = a.at("finetune_outside_pool").get<std::size_t>();
      rec.audit.finetune_test_reads = a.at("finetune_test_reads").get<std::size_t>();
      rec.audit.eval_queries = a.at("eval_queries").get<std::size_t>();
      rec.audit.eval_queries_in_pool = a.at("eval_queries_in_pool").get<std::size_t>();
      r.runs.push_back(std::move(rec));
    }
  } else {
    for (std::size_t i = 0; i < miou.size(); ++i) {
      RunRecord rec;
      rec.report.miou = miou[i];
      if (i < r.seeds.size()) rec.report.seed = r.seeds[i];
      r.runs.push_back(std::move(rec));
    }
  }
  if (r.runs.size() != miou.size()) throw std::invalid_argument("report runs and per_run_miou disagree");
  if (j.contains("config") && !j.at("config").empty()) r.config_json = j.at("config").dump();
  return r;
}

void write_report(const RepeatedReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report " + path.string());
  out << report_to_json(report) << '\n';
}

std::vector<AblationRow> ablation_suite(const episodes::Dataset& dataset,
                                        const AblationConfig& config) {
  if (config.variants.empty()) throw std::invalid_argument("ablation needs at least one variant");
  Rng init_rng(config.init_seed);
  const training::Model initial = training::initial_model(config.channels, init_rng);

  // Source training is independent per variant.
  std::vector<training::Model> trained(config.variants.size(), initial);
  parallel_for(config.variants.size(), config.protocol.threads, [&](std::size_t i) {
    auto cfg = config.source;
    cfg.pipeline.variant = config.variants[i];
    training::train_source(dataset, trained[i], cfg);
    trained[i] = training::quantize(trained[i]);
  });

  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < config.variants.size(); ++i) {
    auto protocol = config.protocol;
    protocol.finetune.pipeline.variant = config.variants[i];
    rows.push_back({config.variants[i].name(), config.variants[i].label(),
                    repeated_eval(dataset, trained[i], protocol)});
  }
  if (config.source_only_row) {
    const auto full = std::find(config.variants.begin(), config.variants.end(), training::Variant{});
    training::Model base = initial;
    if (full != config.variants.end()) {
      base = trained[static_cast<std::size_t>(full - config.variants.begin())];
    } else {
      auto cfg = config.source;
      cfg.pipeline.variant = {};
      training::train_source(dataset, base, cfg);
      base = training::quantize(base);
    }
    auto protocol = config.protocol;
    protocol.finetune.pipeline.variant = {};
    protocol.do_finetune = false;
    rows.push_back({"source-only", kSourceOnlyLabel, repeated_eval(dataset, base, protocol)});
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "variant,label,mean,std,runs\n" << std::fixed << std::setprecision(4);
  for (const auto& r : rows)
    out << r.variant << ',' << r.label << ',' << 100.0 * r.report.mean << ','
        << 100.0 * r.report.std << ',' << r.report.runs.size() << '\n';
  return out.str();
}

}  // namespace fssti::eval
