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

#include "fssti/cli/commands.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <vector>

#include <CLI11.hpp>

#include "fssti/cli/gradcheck.hpp"
#include "fssti/config.hpp"
#include "fssti/backbone/external.hpp"
#include "fssti/core/io.hpp"
#include "fssti/core/parallel.hpp"
#include "fssti/eval/pca.hpp"

namespace fssti::cli {

namespace {

namespace fs = std::filesystem;

class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every config field as a dashed flag; set flags override the config file.
class ConfigFlags {
 public:
  void attach(CLI::App& app) {
    app.add_option("--config", config_path_, "JSON config file");
    bind(app, "--seed", &ExperimentConfig::seed);
    bind(app, "--image-size", &ExperimentConfig::image_size);
    bind(app, "--images-per-category", &ExperimentConfig::images_per_category);
    bind(app, "--channels", &ExperimentConfig::channels);
    bind(app, "--k", &ExperimentConfig::k);
    bind(app, "--n-intervals", &ExperimentConfig::n_intervals);
    bind(app, "--interval-length", &ExperimentConfig::h);
    bind(app, "--tau", &ExperimentConfig::tau);
    bind(app, "--alpha1", &ExperimentConfig::alpha1);
    bind(app, "--alpha2", &ExperimentConfig::alpha2);
    bind(app, "--lr-source", &ExperimentConfig::lr_source);
    bind(app, "--lr-finetune", &ExperimentConfig::lr_finetune);
    bind(app, "--momentum", &ExperimentConfig::momentum);
    bind(app, "--iterations-source", &ExperimentConfig::iterations_source);
    bind(app, "--iterations-finetune", &ExperimentConfig::iterations_finetune);
    bind(app, "--repeats", &ExperimentConfig::repeats);
    bind(app, "--variant", &ExperimentConfig::variant)
        ->check(CLI::IsMember({"full", "no-ode", "no-fft", "no-rsp", "no-reg", "no-dsloss"}));
    bind(app, "--reg-form", &ExperimentConfig::reg_form)->check(CLI::IsMember({"signed", "absolute"}));
    bind(app, "--std-kind", &ExperimentConfig::std_kind)->check(CLI::IsMember({"sample", "population"}));
    bind(app, "--data", &ExperimentConfig::data);
    bind(app, "--checkpoint", &ExperimentConfig::checkpoint);
    bind(app, "--out", &ExperimentConfig::out);
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg;
    if (!config_path_.empty()) cfg = load_config(config_path_);
    for (const auto& apply : setters_) apply(cfg);
    cfg.validate();
    return cfg;
  }

 private:
  template <typename T>
  CLI::Option* bind(CLI::App& app, const std::string& flag, T ExperimentConfig::*field) {
    auto* opt = app.add_option(flag, values_.*field);
    setters_.push_back([this, opt, field](ExperimentConfig& cfg) {
      if (opt->count() > 0) cfg.*field = values_.*field;
    });
    return opt;
  }

  std::string config_path_;
  ExperimentConfig values_;
  std::vector<std::function<void(ExperimentConfig&)>> setters_;
};

episodes::Dataset load_or_generate(const ExperimentConfig& cfg, std::ostream& out) {
  if (!cfg.data.empty()) {
    if (!fs::exists(fs::path(cfg.data) / backbone::kManifestName))
      throw MissingArtifact("dataset directory " + cfg.data + " has no manifest");
    return episodes::import_dataset(cfg.data);
  }
  out << "generating synthetic dataset (seed " << cfg.seed << ")\n";
  return episodes::generate_dataset(cfg.synth_spec());
}

training::Model load_model(const ExperimentConfig& cfg) {
  if (cfg.checkpoint.empty()) throw MissingArtifact("--checkpoint is required");
  if (!fs::exists(cfg.checkpoint)) throw MissingArtifact("checkpoint " + cfg.checkpoint + " not found");
  return training::from_checkpoint(training::read_checkpoint(cfg.checkpoint));
}

std::string out_or(const ExperimentConfig& cfg, const std::string& fallback) {
  return cfg.out.empty() ? fallback : cfg.out;
}

int cmd_synth(const ExperimentConfig& cfg, std::ostream& out) {
  const auto data = episodes::generate_dataset(cfg.synth_spec());
  const fs::path dir = out_or(cfg, "data");
  episodes::export_dataset(data, dir);
  out << (dir / backbone::kManifestName).string() << '\n';
  return kExitOk;
}

int cmd_train(const ExperimentConfig& cfg, std::ostream& out) {
  const auto data = load_or_generate(cfg, out);
  Rng init(cfg.seed);
  auto model = training::initial_model(cfg.channels, init);
  const auto tc = cfg.source_training();
  const auto log = training::train_source(data, model, tc, [&](int it, const auto& l) {
    if ((it + 1) % 100 == 0)
      out << "iter " << it + 1 << " total " << l.total << " ds " << l.ds << " da_q " << l.da_q
          << " da_s " << l.da_s << " reg " << l.reg << '\n';
  });
  const fs::path path = out_or(cfg, "checkpoint.fsti");
  training::write_checkpoint(training::to_checkpoint(model), path);
  out << "wrote " << path.string() << " after " << log.steps.size() << " iterations\n";
  return kExitOk;
}

int cmd_finetune(const ExperimentConfig& cfg, std::ostream& out) {
  auto model = load_model(cfg);
  const auto data = load_or_generate(cfg, out);
  const auto split = eval::split_for_seed(data, cfg.k, cfg.seed);
  episodes::AccessAudit audit;
  training::finetune_target(split.pool, model, cfg.finetuning(), &audit);
  const auto summary = eval::summarize(audit, split.pool, split.test);
  const fs::path path = out_or(cfg, "finetuned.fsti");
  training::write_checkpoint(training::to_checkpoint(model), path);
  out << "pool:";
  for (const auto& id : split.pool.ids()) out << ' ' << id;
  out << "\nfine-tune reads " << summary.finetune_reads << ", outside pool "
      << summary.finetune_outside_pool << "\nwrote " << path.string() << '\n';
  return summary.clean() ? kExitOk : kExitCheckFailed;
}

int cmd_eval(const ExperimentConfig& cfg, bool source_only, std::ostream& out) {
  const auto model = load_model(cfg);
  const auto data = load_or_generate(cfg, out);
  auto protocol = cfg.protocol(worker_count());
  protocol.do_finetune = !source_only;
  auto report = eval::repeated_eval(data, model, protocol);
  report.config_json = cfg.to_json();
  const fs::path path = out_or(cfg, "report.json");
  eval::write_report(report, path);
  bool clean = true;
  for (const auto& r : report.runs) clean = clean && r.audit.clean();
  out << std::fixed << std::setprecision(2) << "mIoU " << 100.0 * report.mean << " +- "
      << 100.0 * report.std << " over " << report.runs.size() << " runs\n"
      << "access audit: " << (clean ? "clean" : "VIOLATED") << "\nwrote " << path.string() << '\n';
  return clean ? kExitOk : kExitCheckFailed;
}

int cmd_ablate(const ExperimentConfig& cfg, bool variant_given, const std::string& pca_path,
               std::ostream& out) {
  const auto data = load_or_generate(cfg, out);
  eval::AblationConfig ac;
  ac.source = cfg.source_training();
  ac.protocol = cfg.protocol(worker_count());
  ac.channels = cfg.channels;
  ac.init_seed = cfg.seed;
  if (variant_given) {
    ac.variants = {training::Variant::parse(cfg.variant)};
    ac.source_only_row = false;
  } else {
    for (const char* v : {"full", "no-ode", "no-fft", "no-rsp", "no-reg", "no-dsloss"})
      ac.variants.push_back(training::Variant::parse(v));
  }
  const auto rows = eval::ablation_suite(data, ac);
  const std::string csv = eval::ablation_csv(rows);
  const fs::path path = out_or(cfg, "ablation.csv");
  std::ofstream(path) << csv;
  out << csv << "wrote " << path.string() << '\n';

  if (!pca_path.empty()) {
    // Domain-specific vs domain-agnostic channel means of source and target
    // images under a source-trained full model.
    Rng init(cfg.seed);
    auto model = training::initial_model(cfg.channels, init);
    auto tc = cfg.source_training();
    tc.pipeline.variant = {};
    training::train_source(data, model, tc);
    std::vector<Vec> points;
    std::vector<std::string> labels;
    const auto pipeline = tc.pipeline;
    for (const auto& s : data.samples()) {
      const auto ds = model.backbone.extract(s.image);
      const std::string dom = s.domain == episodes::Domain::kSource ? "source" : "target";
      points.push_back(eval::channel_means(ds));
      labels.push_back(dom + "-specific");
      points.push_back(eval::channel_means(training::domain_agnostic(model, s.image, pipeline)));
      labels.push_back(dom + "-agnostic");
    }
    eval::pca_export(points, labels, pca_path);
    out << "wrote " << pca_path << '\n';
  }
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, const std::string& flip, std::ostream& out) {
  GradcheckOptions opt;
  opt.seed = seed;
  opt.flip_sign_of = flip;
  const auto report = run_gradcheck(opt);
  out << std::scientific << std::setprecision(3);
  for (const auto& e : report.entries)
    out << (e.passed() ? "ok   " : "FAIL ") << e.suite << ' ' << e.parameter << " rel_err "
        << e.relative_error << " (tol " << e.tolerance << ")\n";
  if (const auto bad = report.first_failure()) {
    out << "gradcheck failed: " << bad->parameter << '\n';
    return kExitCheckFailed;
  }
  out << "gradcheck passed\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spectral-ODE feature transform and cross-domain few-shot segmentation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  ConfigFlags synth_flags, train_flags, finetune_flags, eval_flags, ablate_flags;
  auto* synth = app.add_subcommand("synth", "generate and export the synthetic dataset");
  synth_flags.attach(*synth);
  auto* train = app.add_subcommand("train", "episodic source-domain training");
  train_flags.attach(*train);
  auto* finetune = app.add_subcommand("finetune", "strict-pool target fine-tuning");
  finetune_flags.attach(*finetune);
  auto* evalc = app.add_subcommand("eval", "repeated split/fine-tune/evaluate protocol");
  eval_flags.attach(*evalc);
  bool source_only = false;
  evalc->add_flag("--source-only", source_only, "skip fine-tuning");
  auto* ablate = app.add_subcommand("ablate", "component ablation table");
  ablate_flags.attach(*ablate);
  std::string pca_path;
  ablate->add_option("--pca", pca_path, "also write a PCA CSV of channel means");
  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  std::uint64_t grad_seed = 0;
  std::string flip;
  grad->add_option("--seed", grad_seed);
  grad->add_option("--flip-sign", flip, "test hook: negate one analytic gradient")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(synth_flags.resolve(), out);
    if (*train) return cmd_train(train_flags.resolve(), out);
    if (*finetune) return cmd_finetune(finetune_flags.resolve(), out);
    if (*evalc) return cmd_eval(eval_flags.resolve(), source_only, out);
    if (*ablate) {
      const bool variant_given = ablate->count("--variant") > 0;
      return cmd_ablate(ablate_flags.resolve(), variant_given, pca_path, out);
    }
    if (*grad) return cmd_gradcheck(grad_seed, flip, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const MissingArtifact& e) {
    err << "missing artifact: " << e.what() << '\n';
    return kExitMissingArtifact;
  } catch (const IoError& e) {
    err << "missing artifact: " << e.what() << '\n';
    return kExitMissingArtifact;
  } catch (const training::TrainingDiverged& e) {
    err << "training aborted: " << e.what() << '\n';
    return kExitCheckFailed;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
  return kExitUsage;
}

}  // namespace fssti::cli
