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

#ifndef KCM_EVAL_HPP_
#define KCM_EVAL_HPP_

// Experiment drivers and their reports: cascade evaluation by region, the
// KAN-vs-MLP ablation and the sequential-phase forgetting benchmark.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "kcm/collaboration.hpp"
#include "kcm/config.hpp"

namespace kcm {

inline constexpr int kReportVersion = 1;

struct EvalReport {
  std::string label;  // column name in the human table
  std::string model_kind;
  std::size_t parameter_count = 0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  std::string dataset_hash;

  std::size_t samples = 0;
  std::array<std::size_t, 3> region_samples{};                 // head, med, tail
  std::array<std::size_t, 3> region_correct{};
  std::array<std::optional<double>, 3> region_accuracy;        // percent; empty region -> absent
  double overall_accuracy = 0.0;                               // percent
  double lm_rate = 0.0;                                        // percent, from the decision log
  std::size_t backend_calls = 0;
  std::size_t backend_failures = 0;
  std::size_t degraded = 0;
  double cost_units = 0.0;
  nlohmann::ordered_json config;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// Region and overall accuracy plus lm_rate, computed from a decision log
// joined against the samples by id. Every sample must have exactly one record.
void summarize_decisions(std::span<const Sample> samples, std::span<const DecisionRecord> records,
                         EvalReport& report);

// Percentage of records routed to the large model.
double lm_rate_from_log(std::span<const DecisionRecord> records);

struct CascadeRun {
  EvalReport report;
  std::vector<DecisionRecord> decisions;  // sorted by sample id
};

// Runs infer on every test sample and aggregates by region. Backend call
// counts and cost come from a counting wrapper around the given backend.
CascadeRun evaluate_cascade(std::span<const Sample> test, const ClassifierHandle& judgment,
                            const ClassifierHandle& small, LargeModelBackend& backend,
                            const RouteConfig& config, std::span<const std::string> class_names);

// Small (epsilon = 0: the judgment model answers everything), large
// (epsilon = 1: everything goes to the large model) and the configured cascade.
struct CascadeComparison {
  CascadeRun small;
  CascadeRun large;
  CascadeRun kcm;
};

CascadeComparison compare_cascade(std::span<const Sample> test, const ClassifierHandle& judgment,
                                  const ClassifierHandle& small, LargeModelBackend& backend,
                                  const RouteConfig& config,
                                  std::span<const std::string> class_names);

nlohmann::ordered_json report_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

// Rows are metrics (head, med, tail, overall, LM rate, calls), columns reports.
std::string report_table(std::span<const EvalReport> columns);

// sample_id,label,region,target,c_x,c_s,c_l,degraded,prediction,correct
std::string decisions_csv(std::span<const Sample> samples, std::span<const DecisionRecord> records);

// --- ablation -------------------------------------------------------------

struct PartitionSizes {
  std::size_t x1 = 0;
  std::size_t x2 = 0;
  std::size_t x3 = 0;
  friend bool operator==(const PartitionSizes&, const PartitionSizes&) = default;
};

struct AblationArm {
  std::string name;  // "KCM" for a KAN arm, "MCM" for an MLP arm
  ModelKind kind = ModelKind::kKan;
  std::vector<int> dims;
  std::size_t parameter_count = 0;
  std::string stream_hash;  // ids fed to judgment training and partitioning, in order
  PartitionSizes partition;
  std::string partition_hash;
  CascadeRun run;
};

struct AblationReport {
  std::string dataset_hash;
  AblationArm first;
  AblationArm second;
  bool streams_match = false;
  double parameter_ratio = 1.0;  // second / first
};

// Trains both arms through the identical pipeline (judgment training,
// partitioning with the same backend, distillation, cascade evaluation).
// An MLP arm facing a KAN arm is capacity-matched to it; kConfig is thrown
// when no MLP width lands within +-10% of the KAN parameter count.
AblationReport run_ablation(const Dataset& dataset, const RunConfig& config,
                            LargeModelBackend& backend);
// Uses the backend described by the config.
AblationReport run_ablation(const Dataset& dataset, const RunConfig& config);

nlohmann::ordered_json ablation_json(const AblationReport& report);
std::string ablation_table(const AblationReport& report);

// --- forgetting -----------------------------------------------------------

struct ForgettingConfig {
  ModelKind kind = ModelKind::kKan;
  ForgettingVariant variant = ForgettingVariant::kRegression;
  int phases = 5;
  std::uint64_t seed = 0;
  bool frozen = false;  // evaluate without training: the no-training control

  // Regression variant: y(x) = sum of Gaussian peaks, one per phase region.
  int intervals = 20;
  int samples_per_phase = 200;
  int eval_points_per_phase = 100;
  double tolerance = 0.1;  // |prediction - target| below this counts as retained
  // Off: a KAN trains only its spline coefficients, so an update touches just
  // the basis functions that are nonzero at the sample.
  bool train_kan_scales = false;
  int epochs_per_phase = 300;
  double learning_rate = 0.2;
  int batch_size = 16;
};

struct ForgettingReport {
  std::string model_kind;
  std::string variant;
  int phases = 0;
  std::uint64_t seed = 0;
  bool frozen = false;
  std::vector<int> dims;
  std::size_t parameter_count = 0;
  // retention[i][j]: accuracy on task j after phase i; absent for j > i.
  std::vector<std::vector<std::optional<double>>> retention;
  double score = 0.0;

  friend bool operator==(const ForgettingReport&, const ForgettingReport&) = default;
};

// Throws kInvalidArgument if two phases share a class.
void check_disjoint_phases(std::span<const std::vector<int>> phase_classes);

// mean over tasks j of (max_i R[i][j] - R[last][j]).
double forgetting_score(const std::vector<std::vector<std::optional<double>>>& retention);

ForgettingReport run_forgetting_benchmark(const ForgettingConfig& config);
ForgettingReport run_forgetting_benchmark(ModelKind kind, int phases, std::uint64_t seed);

nlohmann::ordered_json forgetting_json(const ForgettingReport& report);
std::string forgetting_table(std::span<const ForgettingReport> reports);

}  // namespace kcm

#endif  // KCM_EVAL_HPP_
