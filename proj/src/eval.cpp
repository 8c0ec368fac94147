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

#include "kcm/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_map>

#include "kcm/mlp.hpp"

namespace kcm {

namespace {

int RegionIndex(Region r) {
  switch (r) {
    case Region::kHead:
      return 0;
    case Region::kMed:
      return 1;
    case Region::kTail:
      return 2;
    case Region::kUnknown:
      break;
  }
  return -1;
}

constexpr std::array<const char*, 3> kRegionNames = {"head", "med", "tail"};

std::string Percent(const std::optional<double>& v) { return v ? format_fixed(*v, 2) : "-"; }

std::string PadRight(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string PadLeft(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

}  // namespace

double lm_rate_from_log(std::span<const DecisionRecord> records) {
  if (records.empty()) return 0.0;
  const auto large = std::count_if(records.begin(), records.end(), [](const DecisionRecord& r) {
    return r.target == RouteTarget::kLargeModel;
  });
  return 100.0 * static_cast<double>(large) / static_cast<double>(records.size());
}

void summarize_decisions(std::span<const Sample> samples, std::span<const DecisionRecord> records,
                         EvalReport& report) {
  require(records.size() == samples.size(), ErrorKind::kData,
          "decision log has " + std::to_string(records.size()) + " records for " +
              std::to_string(samples.size()) + " samples");
  std::unordered_map<std::uint64_t, const DecisionRecord*> by_id;
  for (const DecisionRecord& r : records)
    require(by_id.emplace(r.sample_id, &r).second, ErrorKind::kData,
            "decision log repeats sample " + std::to_string(r.sample_id));

  report.samples = samples.size();
  report.region_samples = {};
  report.region_correct = {};
  report.degraded = 0;
  for (const Sample& s : samples) {
    auto it = by_id.find(s.id);
    require(it != by_id.end(), ErrorKind::kData,
            "decision log has no record for sample " + std::to_string(s.id));
    const int region = RegionIndex(s.region);
    require(region >= 0, ErrorKind::kData,
            "sample " + std::to_string(s.id) + " has no region tag");
    ++report.region_samples[region];
    report.region_correct[region] += it->second->prediction == s.label;
    report.degraded += it->second->degraded;
  }

  double weighted = 0.0;
  for (int r = 0; r < 3; ++r) {
    if (report.region_samples[r] == 0) {
      report.region_accuracy[r].reset();
      continue;
    }
    const double acc = 100.0 * static_cast<double>(report.region_correct[r]) /
                       static_cast<double>(report.region_samples[r]);
    report.region_accuracy[r] = acc;
    weighted += static_cast<double>(report.region_samples[r]) * acc;
  }
  report.overall_accuracy =
      samples.empty() ? 0.0 : weighted / static_cast<double>(samples.size());
  report.lm_rate = lm_rate_from_log(records);
}

CascadeRun evaluate_cascade(std::span<const Sample> test, const ClassifierHandle& judgment,
                            const ClassifierHandle& small, LargeModelBackend& backend,
                            const RouteConfig& config, std::span<const std::string> class_names) {
  require(!test.empty(), ErrorKind::kData, "test split is empty");
  CountingBackend counter(backend);
  DecisionLog log;
  infer_batch(test, judgment, small, counter, config, class_names, &log);

  CascadeRun run;
  run.decisions = log.records();
  run.report.model_kind = std::string(to_string(small.kind()));
  run.report.parameter_count = small.parameter_count();
  run.report.epsilon = config.epsilon;
  summarize_decisions(test, run.decisions, run.report);
  run.report.backend_calls = counter.calls();
  run.report.backend_failures = counter.failures();
  run.report.cost_units = counter.cost_units();
  return run;
}

CascadeComparison compare_cascade(std::span<const Sample> test, const ClassifierHandle& judgment,
                                  const ClassifierHandle& small, LargeModelBackend& backend,
                                  const RouteConfig& config,
                                  std::span<const std::string> class_names) {
  CascadeComparison c;
  RouteConfig cfg = config;
  cfg.epsilon = 0.0;
  c.small = evaluate_cascade(test, judgment, small, backend, cfg, class_names);
  c.small.report.label = "Small";
  cfg.epsilon = 1.0;
  c.large = evaluate_cascade(test, judgment, small, backend, cfg, class_names);
  c.large.report.label = "Large";
  c.kcm = evaluate_cascade(test, judgment, small, backend, config, class_names);
  c.kcm.report.label = "KCM";
  return c;
}

nlohmann::ordered_json report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["format_version"] = kReportVersion;
  j["label"] = r.label;
  j["model_kind"] = r.model_kind;
  j["parameter_count"] = r.parameter_count;
  j["epsilon"] = r.epsilon;
  j["seed"] = r.seed;
  j["dataset_hash"] = r.dataset_hash;
  j["samples"] = r.samples;
  nlohmann::ordered_json regions;
  for (int i = 0; i < 3; ++i) {
    nlohmann::ordered_json reg;
    reg["samples"] = r.region_samples[i];
    reg["correct"] = r.region_correct[i];
    reg["accuracy"] = r.region_accuracy[i] ? nlohmann::ordered_json(*r.region_accuracy[i])
                                           : nlohmann::ordered_json(nullptr);
    regions[kRegionNames[i]] = reg;
  }
  j["regions"] = regions;
  j["overall_accuracy"] = r.overall_accuracy;
  j["lm_rate"] = r.lm_rate;
  j["backend_calls"] = r.backend_calls;
  j["backend_failures"] = r.backend_failures;
  j["degraded"] = r.degraded;
  j["cost_units"] = r.cost_units;
  j["config"] = r.config;
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  try {
    require(j.at("format_version").get<int>() == kReportVersion, ErrorKind::kData,
            "unsupported report version");
    EvalReport r;
    r.label = j.at("label").get<std::string>();
    r.model_kind = j.at("model_kind").get<std::string>();
    r.parameter_count = j.at("parameter_count").get<std::size_t>();
    r.epsilon = j.at("epsilon").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.dataset_hash = j.at("dataset_hash").get<std::string>();
    r.samples = j.at("samples").get<std::size_t>();
    for (int i = 0; i < 3; ++i) {
      const auto& reg = j.at("regions").at(kRegionNames[i]);
      r.region_samples[i] = reg.at("samples").get<std::size_t>();
      r.region_correct[i] = reg.at("correct").get<std::size_t>();
      if (!reg.at("accuracy").is_null()) r.region_accuracy[i] = reg["accuracy"].get<double>();
    }
    r.overall_accuracy = j.at("overall_accuracy").get<double>();
    r.lm_rate = j.at("lm_rate").get<double>();
    r.backend_calls = j.at("backend_calls").get<std::size_t>();
    r.backend_failures = j.at("backend_failures").get<std::size_t>();
    r.degraded = j.at("degraded").get<std::size_t>();
    r.cost_units = j.at("cost_units").get<double>();
    r.config = nlohmann::ordered_json::parse(j.at("config").dump());
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kData, std::string("malformed report: ") + e.what());
  }
}

std::string report_table(std::span<const EvalReport> columns) {
  constexpr std::size_t kFirst = 10;
  constexpr std::size_t kCol = 10;
  std::string out = PadRight("", kFirst);
  for (const EvalReport& r : columns) out += PadLeft(r.label, kCol);
  out += '\n';
  auto row = [&](const std::string& name, auto cell) {
    out += PadRight(name, kFirst);
    for (const EvalReport& r : columns) out += PadLeft(cell(r), kCol);
    out += '\n';
  };
  for (int i = 0; i < 3; ++i)
    row(kRegionNames[i], [i](const EvalReport& r) { return Percent(r.region_accuracy[i]); });
  row("overall", [](const EvalReport& r) { return format_fixed(r.overall_accuracy, 2); });
  row("LM rate", [](const EvalReport& r) { return format_fixed(r.lm_rate, 2); });
  row("calls", [](const EvalReport& r) { return std::to_string(r.backend_calls); });
  return out;
}

std::string decisions_csv(std::span<const Sample> samples, std::span<const DecisionRecord> records) {
  std::unordered_map<std::uint64_t, const Sample*> by_id;
  for (const Sample& s : samples) by_id.emplace(s.id, &s);
  std::string out = "sample_id,label,region,target,c_x,c_s,c_l,degraded,prediction,correct\n";
  for (const DecisionRecord& r : records) {
    auto it = by_id.find(r.sample_id);
    require(it != by_id.end(), ErrorKind::kData,
            "decision for unknown sample " + std::to_string(r.sample_id));
    const Sample& s = *it->second;
    out += std::to_string(r.sample_id) + ',' + std::to_string(s.label) + ',' +
           std::string(to_string(s.region)) + ',' + std::string(to_string(r.target)) + ',' +
           format_double(r.c_x) + ',' + (r.c_s ? format_double(*r.c_s) : "") + ',' +
           (r.c_l ? format_double(*r.c_l) : "") + ',' + (r.degraded ? "1" : "0") + ',' +
           std::to_string(r.prediction) + ',' + (r.prediction == s.label ? "1" : "0") + '\n';
  }
  return out;
}

// --- ablation -------------------------------------------------------------

namespace {

std::vector<int> ArmDims(ModelKind kind, ModelKind other, const ArchSpec& arch, int in, int out) {
  std::vector<int> dims{in};
  dims.insert(dims.end(), arch.hidden.begin(), arch.hidden.end());
  dims.push_back(out);
  if (kind == ModelKind::kMlp && other == ModelKind::kKan) {
    try {
      return match_capacity_dims(KanShape{dims, arch.order, arch.intervals, arch.lo, arch.hi});
    } catch (const Error& e) {
      fail(ErrorKind::kConfig, std::string("ablation capacity match failed: ") + e.what());
    }
  }
  return dims;
}

AblationArm RunArm(const Dataset& ds, const RunConfig& config, LargeModelBackend& backend,
                   ModelKind kind, ModelKind other, const std::string& dataset_hash) {
  const std::vector<Sample> train = ds.split(Split::kTrain);
  const std::vector<Sample> test = ds.split(Split::kTest);
  const std::uint64_t seed = config.seed.value_or(0);

  AblationArm arm;
  arm.kind = kind;
  arm.name = kind == ModelKind::kKan ? "KCM" : "MCM";
  arm.dims = ArmDims(kind, other, config.arch, ds.feature_dim, ds.num_classes);

  ArchSpec arch = config.arch;
  arch.kind = kind;
  arch.hidden.assign(arm.dims.begin() + 1, arm.dims.end() - 1);

  Fnv1a stream;
  const ClassifierHandle judgment =
      train_supervised(train, ds.num_classes, arch, config.judgment, seed, &stream);
  for (const Sample& s : train) stream.update_u64(s.id);
  arm.stream_hash = stream.hex();
  arm.parameter_count = judgment.parameter_count();

  DistillationConfig distill = config.distill;
  distill.seed = seed;
  const TrainingPartition part =
      partition_training(train, judgment, backend, distill, ds.class_names, [](const std::string&) {});
  arm.partition = {part.x1.size(), part.x2.size(), part.x3.size()};
  Fnv1a ph;
  for (const auto* set : {&part.x1, &part.x2, &part.x3}) {
    for (std::uint64_t id : *set) ph.update_u64(id);
    ph.update("|");
  }
  arm.partition_hash = ph.hex();

  const ClassifierHandle small = train_kcm(part, train, judgment, distill);
  arm.run = evaluate_cascade(test, judgment, small, backend, config.route, ds.class_names);
  EvalReport& r = arm.run.report;
  r.label = arm.name;
  r.seed = seed;
  r.dataset_hash = dataset_hash;
  r.config = config_json(config);
  return arm;
}

}  // namespace

AblationReport run_ablation(const Dataset& dataset, const RunConfig& config,
                            LargeModelBackend& backend) {
  validate(config.distill);
  AblationReport rep;
  rep.dataset_hash = dataset_hash(dataset);
  rep.first = RunArm(dataset, config, backend, config.ablation_first, config.ablation_second,
                     rep.dataset_hash);
  rep.second = RunArm(dataset, config, backend, config.ablation_second, config.ablation_first,
                      rep.dataset_hash);
  rep.streams_match = rep.first.stream_hash == rep.second.stream_hash;
  rep.parameter_ratio = static_cast<double>(rep.second.parameter_count) /
                        static_cast<double>(rep.first.parameter_count);
  require(rep.parameter_ratio >= 0.9 && rep.parameter_ratio <= 1.1, ErrorKind::kConfig,
          "ablation arms differ in parameter count by more than 10%");
  return rep;
}

AblationReport run_ablation(const Dataset& dataset, const RunConfig& config) {
  auto backend = make_backend(config, dataset.class_names);
  return run_ablation(dataset, config, *backend);
}

nlohmann::ordered_json ablation_json(const AblationReport& rep) {
  nlohmann::ordered_json j;
  j["format_version"] = kReportVersion;
  j["dataset_hash"] = rep.dataset_hash;
  j["streams_match"] = rep.streams_match;
  j["parameter_ratio"] = rep.parameter_ratio;
  nlohmann::ordered_json arms = nlohmann::ordered_json::array();
  for (const AblationArm* a : {&rep.first, &rep.second}) {
    nlohmann::ordered_json arm;
    arm["name"] = a->name;
    arm["kind"] = std::string(to_string(a->kind));
    arm["dims"] = a->dims;
    arm["parameter_count"] = a->parameter_count;
    arm["stream_hash"] = a->stream_hash;
    arm["partition"] = {{"x1", a->partition.x1}, {"x2", a->partition.x2}, {"x3", a->partition.x3}};
    arm["partition_hash"] = a->partition_hash;
    arm["report"] = report_json(a->run.report);
    arms.push_back(arm);
  }
  j["arms"] = arms;
  return j;
}

std::string ablation_table(const AblationReport& rep) {
  const std::array<EvalReport, 2> cols = {rep.first.run.report, rep.second.run.report};
  std::string out = report_table(cols);
  out += PadRight("params", 10) + PadLeft(std::to_string(rep.first.parameter_count), 10) +
         PadLeft(std::to_string(rep.second.parameter_count), 10) + '\n';
  return out;
}

}  // namespace kcm
