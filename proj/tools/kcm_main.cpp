// Copyright 2026 The KCM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// kcm: generate datasets, train judgment and small models, run routed
// inference and the evaluation drivers.
//
// Exit codes: 0 success, 1 unexpected failure, 2 config/usage error,
// 3 data error, 4 backend error, 5 numerical abort.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kcm/config.hpp"
#include "kcm/eval.hpp"
#include "kcm/simd.hpp"

namespace fs = std::filesystem;
using namespace kcm;

namespace {

constexpr const char* kDatasetFile = "dataset.csv";
constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kSnapshotFile = "config.snapshot";

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> epsilon;
  std::string backend;
  std::string out;
  std::string data;
  std::string models;
  std::vector<std::string> overrides;  // key=value
};

void AddCommonFlags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "key = value config file");
  cmd->add_option("--seed", f.seed, "run seed");
  cmd->add_option("--epsilon", f.epsilon, "confidence threshold");
  cmd->add_option("--backend", f.backend, "large-model backend: oracle or http");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--data", f.data, "dataset directory (dataset.csv + manifest.json)");
  cmd->add_option("--models", f.models, "model directory");
  cmd->add_option("--set", f.overrides, "extra key=value setting, repeatable");
}

RunConfig BuildConfig(const CommonFlags& f, bool seed_required) {
  RunConfig c = f.config_path.empty() ? RunConfig{} : load_run_config(f.config_path);
  for (const std::string& kv : f.overrides) {
    const auto eq = kv.find('=');
    require(eq != std::string::npos, ErrorKind::kConfig, "--set expects key=value, got '" + kv + "'");
    apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.seed) c.seed = *f.seed;
  if (f.epsilon) apply_setting(c, "epsilon", format_double(*f.epsilon));
  if (!f.backend.empty()) apply_setting(c, "backend", f.backend);
  if (!f.out.empty()) c.out_dir = f.out;
  if (!f.data.empty()) c.data_dir = f.data;
  if (!f.models.empty()) c.models_dir = f.models;
  resolve(c, seed_required);
  return c;
}

void WriteSnapshot(const RunConfig& c) {
  write_file(fs::path(c.out_dir) / kSnapshotFile, config_snapshot(c));
}

Dataset LoadDataset(const RunConfig& c) {
  const fs::path dir(c.data_dir);
  require(fs::exists(dir / kDatasetFile), ErrorKind::kData,
          "no dataset at " + (dir / kDatasetFile).string() + " (run kcm generate first)");
  CsvSchema schema;
  if (fs::exists(dir / kManifestFile)) {
    schema = schema_from_manifest(read_file(dir / kManifestFile));
  } else {
    schema.feature_dim = c.data.feature_dim;
    schema.num_classes = c.data.num_classes;
  }
  Dataset ds = load_csv(dir / kDatasetFile, schema);
  const auto hist = class_histogram(ds.samples, ds.num_classes);
  std::cerr << "loaded " << ds.samples.size() << " rows from " << (dir / kDatasetFile).string()
            << "; per-class counts:";
  for (int n : hist) std::cerr << ' ' << n;
  std::cerr << '\n';
  return ds;
}

void RequireModels(const fs::path& dir) {
  for (const char* stem : {"judgment", "small"})
    for (const char* ext : {".kcmn", ".meta.json"})
      require(fs::exists(dir / (std::string(stem) + ext)), ErrorKind::kData,
              "missing model file " + (dir / (std::string(stem) + ext)).string() +
                  " (run kcm train first)");
}

int CmdGenerate(const RunConfig& c) {
  const Dataset ds = generate_longtail(c.data);
  const fs::path out(c.out_dir);
  write_csv(out / kDatasetFile, ds);
  write_file(out / kManifestFile, manifest_json(ds, &c.data));
  WriteSnapshot(c);
  std::cout << "wrote " << ds.samples.size() << " samples (" << ds.num_classes << " classes) to "
            << (out / kDatasetFile).string() << "\n";
  return 0;
}

int CmdTrain(const RunConfig& c) {
  const Dataset ds = LoadDataset(c);
  const std::vector<Sample> train = ds.split(Split::kTrain);
  const std::uint64_t seed = *c.seed;

  const ClassifierHandle judgment =
      train_supervised(train, ds.num_classes, c.arch, c.judgment, seed);
  auto backend = make_backend(c, ds.class_names);
  std::size_t warnings = 0;
  const TrainingPartition part = partition_training(
      train, judgment, *backend, c.distill, ds.class_names, [&](const std::string& msg) {
        ++warnings;
        std::cerr << "warning: " << msg << "\n";
      });
  const ClassifierHandle small = train_kcm(part, train, judgment, c.distill);

  const fs::path out(c.out_dir);
  save_classifier(out, "judgment", judgment);
  save_classifier(out, "small", small);

  nlohmann::ordered_json curves;
  curves["format_version"] = kReportVersion;
  curves["judgment"] = judgment.loss_curve;
  curves["small"] = small.loss_curve;
  write_file(out / "loss_curves.json", curves.dump(2) + "\n");

  nlohmann::ordered_json pj;
  pj["format_version"] = kReportVersion;
  pj["train_size"] = train.size();
  pj["x1_size"] = part.x1.size();
  pj["x2_size"] = part.x2.size();
  pj["x3_size"] = part.x3.size();
  pj["warnings"] = part.warnings.size();
  pj["x1"] = part.x1;
  pj["x2"] = part.x2;
  pj["x3"] = part.x3;
  write_file(out / "partition.json", pj.dump(2) + "\n");
  WriteSnapshot(c);

  std::cout << "trained " << to_string(judgment.kind()) << " judgment model ("
            << judgment.parameter_count() << " parameters, final loss "
            << format_fixed(judgment.loss_curve.empty() ? 0.0 : judgment.loss_curve.back(), 4)
            << ")\npartition: |x1| = " << part.x1.size() << ", |x2| = " << part.x2.size()
            << ", |x3| = " << part.x3.size() << " (train size " << train.size() << ")\n";
  if (warnings > 0) std::cout << warnings << " warnings (backend failures diverted to x3)\n";
  return 0;
}

struct LoadedModels {
  ClassifierHandle judgment;
  ClassifierHandle small;
};

LoadedModels LoadModels(const RunConfig& c) {
  RequireModels(c.models_dir);
  return {load_classifier(c.models_dir, "judgment"), load_classifier(c.models_dir, "small")};
}

std::vector<Sample> SelectSplit(const Dataset& ds, const std::string& split) {
  return ds.split(parse_split(split));
}

int CmdInfer(const RunConfig& c, const std::string& split) {
  const Dataset ds = LoadDataset(c);
  const LoadedModels m = LoadModels(c);
  const std::vector<Sample> samples = SelectSplit(ds, split);
  auto backend = make_backend(c, ds.class_names);
  DecisionLog log;
  const auto results =
      infer_batch(samples, m.judgment, m.small, *backend, c.route, ds.class_names, &log);

  const fs::path out(c.out_dir);
  write_file(out / "decisions.ndjson", log.to_ndjson(true));
  std::string preds = "sample_id,prediction,target,degraded\n";
  std::size_t degraded = 0;
  for (std::size_t n = 0; n < samples.size(); ++n) {
    preds += std::to_string(samples[n].id) + ',' + std::to_string(results[n].prediction) + ',' +
             std::string(to_string(results[n].decision.target)) + ',' +
             (results[n].decision.degraded ? "1" : "0") + '\n';
    degraded += results[n].decision.degraded;
  }
  write_file(out / "predictions.csv", preds);
  WriteSnapshot(c);
  const auto records = log.records();
  std::cout << "routed " << samples.size() << " samples; LM rate "
            << format_fixed(lm_rate_from_log(records), 2) << "%";
  if (degraded > 0) std::cout << "; " << degraded << " degraded to the small model";
  std::cout << "\n";
  return 0;
}

int CmdEval(const RunConfig& c) {
  const Dataset ds = LoadDataset(c);
  const LoadedModels m = LoadModels(c);
  const std::vector<Sample> test = ds.split(Split::kTest);
  auto backend = make_backend(c, ds.class_names);
  CascadeComparison cmp = compare_cascade(test, m.judgment, m.small, *backend, c.route, ds.class_names);
  const std::string hash = dataset_hash(ds);
  nlohmann::ordered_json reports = nlohmann::ordered_json::array();
  for (CascadeRun* run : {&cmp.small, &cmp.large, &cmp.kcm}) {
    run->report.seed = c.seed.value_or(0);
    run->report.dataset_hash = hash;
    run->report.config = config_json(c);
    reports.push_back(report_json(run->report));
  }
  const std::array<EvalReport, 3> cols = {cmp.small.report, cmp.large.report, cmp.kcm.report};
  const std::string table = report_table(cols);

  const fs::path out(c.out_dir);
  nlohmann::ordered_json j;
  j["format_version"] = kReportVersion;
  j["reports"] = reports;
  write_file(out / "eval_report.json", j.dump(2) + "\n");
  write_file(out / "eval_table.txt", table);
  write_file(out / "decisions.csv", decisions_csv(test, cmp.kcm.decisions));
  WriteSnapshot(c);
  std::cout << table;
  return 0;
}

int CmdAblate(const RunConfig& c) {
  const Dataset ds = LoadDataset(c);
  const AblationReport rep = run_ablation(ds, c);
  const std::vector<Sample> test = ds.split(Split::kTest);
  const fs::path out(c.out_dir);
  write_file(out / "ablation.json", ablation_json(rep).dump(2) + "\n");
  const std::string table = ablation_table(rep);
  write_file(out / "ablation_table.txt", table);
  write_file(out / "decisions_first.csv", decisions_csv(test, rep.first.run.decisions));
  write_file(out / "decisions_second.csv", decisions_csv(test, rep.second.run.decisions));
  WriteSnapshot(c);
  std::cout << table << "id streams match: " << (rep.streams_match ? "yes" : "no")
            << "; dataset " << rep.dataset_hash << "\n";
  return 0;
}

int CmdForget(const RunConfig& c, const std::string& models) {
  std::vector<ModelKind> kinds;
  if (models == "both")
    kinds = {ModelKind::kKan, ModelKind::kMlp};
  else
    kinds = {parse_model_kind(models)};
  std::vector<ForgettingReport> reports;
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (ModelKind k : kinds) {
    ForgettingConfig fc;
    fc.kind = k;
    fc.variant = c.forget_variant;
    fc.phases = c.forget_phases;
    fc.seed = c.seed.value_or(0);
    fc.frozen = c.forget_frozen;
    reports.push_back(run_forgetting_benchmark(fc));
    arr.push_back(forgetting_json(reports.back()));
  }
  const fs::path out(c.out_dir);
  nlohmann::ordered_json j;
  j["format_version"] = kReportVersion;
  j["reports"] = arr;
  write_file(out / "forgetting.json", j.dump(2) + "\n");
  const std::string table = forgetting_table(reports);
  write_file(out / "forgetting_table.txt", table);
  WriteSnapshot(c);
  std::cout << table;
  return 0;
}

int ExitCode(ErrorKind k) {
  switch (k) {
    case ErrorKind::kConfig:
      return 2;
    case ErrorKind::kData:
      return 3;
    case ErrorKind::kBackend:
      return 4;
    case ErrorKind::kNumerical:
      return 5;
    case ErrorKind::kInvalidArgument:
      return 1;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KAN-based collaborative model: small/large model routing and distillation"};
  app.require_subcommand(1);
  bool show_isa = false;
  app.add_flag("--isa", show_isa, "print the selected SIMD kernel set to stderr");

  CommonFlags flags;
  std::string split = "test";
  std::string forget_models = "both";

  auto* gen = app.add_subcommand("generate", "write a seeded long-tail dataset and manifest");
  auto* train = app.add_subcommand("train", "train the judgment model, partition, distill the small model");
  auto* infer = app.add_subcommand("infer", "route one split through the cascade");
  auto* eval = app.add_subcommand("eval", "small / large / cascade report on the test split");
  auto* ablate = app.add_subcommand("ablate", "KAN vs capacity-matched MLP through the same pipeline");
  auto* forget = app.add_subcommand("forget", "sequential-phase forgetting benchmark");
  for (auto* cmd : {gen, train, infer, eval, ablate, forget}) AddCommonFlags(cmd, flags);
  infer->add_option("--split", split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  forget->add_option("--model", forget_models, "kan, mlp or both")
      ->check(CLI::IsMember({"kan", "mlp", "both"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (show_isa) std::cerr << "simd: " << simd::isa_name(simd::active_isa()) << "\n";
    if (*gen) return CmdGenerate(BuildConfig(flags, true));
    if (*train) return CmdTrain(BuildConfig(flags, true));
    if (*infer) return CmdInfer(BuildConfig(flags, false), split);
    if (*eval) return CmdEval(BuildConfig(flags, false));
    if (*ablate) return CmdAblate(BuildConfig(flags, false));
    if (*forget) return CmdForget(BuildConfig(flags, false), forget_models);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ExitCode(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
