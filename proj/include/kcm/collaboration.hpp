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

#ifndef KCM_COLLABORATION_HPP_
#define KCM_COLLABORATION_HPP_

// The collaborative engine: confidence gating between a judgment model F_j,
// a distilled small model F_s and a large model F_l; KL distillation of F_s.

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kcm/backend.hpp"
#include "kcm/classifier.hpp"
#include "kcm/prompt.hpp"

namespace kcm {

inline constexpr double kDefaultEpsilon = 0.98;

enum class ConfidenceSource { kJudgment, kSmall, kLarge };
std::string_view to_string(ConfidenceSource s);

struct ConfidenceScore {
  double value = 0.0;
  ConfidenceSource source = ConfidenceSource::kJudgment;
};

struct Confidence {
  std::vector<double> distribution;
  ConfidenceScore score;
};

// Max-subtracted softmax; the score is the largest probability.
Confidence confidence(std::span<const double> logits,
                      ConfidenceSource source = ConfidenceSource::kJudgment);

// sum_i p_i ln(p_i / max(q_i, 1e-12)), with 0 ln 0 = 0.
double kl_loss(std::span<const double> p, std::span<const double> q);

enum class KlDirection { kStudentFirst, kTeacherFirst };
std::string_view to_string(KlDirection d);
KlDirection parse_kl_direction(std::string_view s);

// KL between softmax(student_logits) and teacher in the configured order.
// Writes d loss / d student_logits into grad and returns the loss.
double distillation_loss(std::span<const double> student_logits, std::span<const double> teacher,
                         KlDirection direction, std::span<double> grad);

enum class RouteTarget { kJudgmentModel, kSmallModel, kLargeModel };
std::string_view to_string(RouteTarget t);
RouteTarget parse_route_target(std::string_view s);

// How the second gate is scored. kSmallConfidence uses F_s's own confidence
// and never calls the large model for gating. kLargeConfidence is the literal
// reading: every sample that fails the first gate is sent to the large model
// and its confidence C_l decides between F_s and F_l.
enum class SecondGate { kSmallConfidence, kLargeConfidence };
std::string_view to_string(SecondGate g);
SecondGate parse_second_gate(std::string_view s);

struct RoutingDecision {
  RouteTarget target = RouteTarget::kLargeModel;
  std::vector<ConfidenceScore> confidence_trace;
  bool degraded = false;
};

// The three-way gate with strict inequalities: C_x > eps -> judgment model,
// else C_second > eps -> small model, else large model.
RouteTarget decide(double c_x, std::optional<double> c_second, double epsilon);

struct RouteConfig {
  double epsilon = kDefaultEpsilon;
  SecondGate second_gate = SecondGate::kSmallConfidence;
  int prompt_top_k = kDefaultPromptTopK;
  int threads = 1;
  int max_in_flight = 4;
};
void validate(const RouteConfig& config);

// Scores F_j then F_s. Never calls the large model.
RoutingDecision route(const Sample& sample, const ClassifierHandle& judgment,
                      const ClassifierHandle& small, const RouteConfig& config);

enum class DistillSchedule { kAlternate, kMixed };
std::string_view to_string(DistillSchedule s);
DistillSchedule parse_distill_schedule(std::string_view s);

struct DistillationConfig {
  double epsilon = kDefaultEpsilon;
  double learning_rate = 0.1;
  int epochs = 100;
  int batch_size = 32;
  KlDirection kl_direction = KlDirection::kStudentFirst;
  // Weight of the large-model term; (1 - loss_mix) weights the judgment term.
  double loss_mix = 0.7;
  // kAlternate: even epochs fit x2 toward the large model with weight
  // 2*loss_mix, odd epochs fit x1 toward F_j with weight 2*(1 - loss_mix).
  // kMixed: every batch draws from x1 and x2 together with those weights.
  DistillSchedule schedule = DistillSchedule::kMixed;
  // Reverse KL has vanishing gradients once the student saturates, so a
  // single oversized step can strand it; 0 disables clipping.
  double max_grad_norm = 5.0;
  int prompt_top_k = kDefaultPromptTopK;
  std::uint64_t seed = 0;
};
void validate(const DistillationConfig& config);

struct TrainingPartition {
  std::vector<std::uint64_t> x1;  // C_x > eps: F_j keeps teaching
  std::vector<std::uint64_t> x2;  // C_x <= eps, C_l > eps: large model teaches
  std::vector<std::uint64_t> x3;  // neither confident, or backend failed
  std::map<std::uint64_t, std::vector<double>> teacher_targets;  // x2 only
  std::vector<std::string> warnings;
};

// Checks disjointness, coverage of the training ids and teacher targets.
void validate(const TrainingPartition& partition, std::span<const Sample> train);

using WarningSink = std::function<void(const std::string&)>;

TrainingPartition partition_training(std::span<const Sample> train,
                                     const ClassifierHandle& judgment, LargeModelBackend& backend,
                                     const DistillationConfig& config,
                                     std::span<const std::string> class_names,
                                     const WarningSink& warn = {});

// F_s <- copy of F_j, then SGD on the KL terms. The returned handle's
// loss_curve holds one mean loss per epoch.
ClassifierHandle train_kcm(const TrainingPartition& partition, std::span<const Sample> train,
                           const ClassifierHandle& judgment, const DistillationConfig& config);

struct DecisionRecord {
  std::uint64_t sample_id = 0;
  RouteTarget target = RouteTarget::kLargeModel;
  double c_x = 0.0;
  std::optional<double> c_s;
  std::optional<double> c_l;
  bool degraded = false;
  int prediction = -1;
  std::int64_t timestamp_ns = 0;
};

// Append-only sink for routing decisions; safe for concurrent appends.
class DecisionLog {
 public:
  void append(DecisionRecord record);
  std::vector<DecisionRecord> records() const;  // sorted by sample id
  std::size_t size() const;

  // One JSON object per line. Timestamps are omitted when include_timestamps
  // is false so reruns can be compared byte for byte.
  std::string to_ndjson(bool include_timestamps = true) const;
  static std::vector<DecisionRecord> parse_ndjson(std::string_view text);

 private:
  mutable std::mutex mu_;
  std::vector<DecisionRecord> records_;
};

struct InferenceResult {
  int prediction = -1;
  RoutingDecision decision;
  std::optional<PromptAugmentation> prompt;
};

// Routed prediction for one sample. Large-model calls carry a prompt built
// from C_x and F_s's distribution; if the call fails the F_s prediction is
// used and the decision is flagged degraded.
InferenceResult infer(const Sample& sample, const ClassifierHandle& judgment,
                      const ClassifierHandle& small, LargeModelBackend& backend,
                      const RouteConfig& config, std::span<const std::string> class_names,
                      DecisionLog* log = nullptr);

// Runs infer over a batch, fanning out over config.threads workers and
// capping concurrent backend calls at config.max_in_flight. Results are in
// input order.
std::vector<InferenceResult> infer_batch(std::span<const Sample> samples,
                                         const ClassifierHandle& judgment,
                                         const ClassifierHandle& small, LargeModelBackend& backend,
                                         const RouteConfig& config,
                                         std::span<const std::string> class_names,
                                         DecisionLog* log = nullptr);

}  // namespace kcm

#endif  // KCM_COLLABORATION_HPP_
