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

#include "kcm/collaboration.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>
#include <semaphore>
#include <thread>
#include <unordered_map>

#include "json.hpp"

namespace kcm {

std::string_view to_string(ConfidenceSource s) {
  switch (s) {
    case ConfidenceSource::kJudgment:
      return "judgment";
    case ConfidenceSource::kSmall:
      return "small";
    case ConfidenceSource::kLarge:
      return "large";
  }
  return "judgment";
}

std::string_view to_string(KlDirection d) {
  return d == KlDirection::kStudentFirst ? "student_first" : "teacher_first";
}

KlDirection parse_kl_direction(std::string_view s) {
  if (s == "student_first") return KlDirection::kStudentFirst;
  if (s == "teacher_first") return KlDirection::kTeacherFirst;
  fail(ErrorKind::kConfig, "kl_direction must be student_first or teacher_first");
}

std::string_view to_string(RouteTarget t) {
  switch (t) {
    case RouteTarget::kJudgmentModel:
      return "judgment";
    case RouteTarget::kSmallModel:
      return "small";
    case RouteTarget::kLargeModel:
      return "large";
  }
  return "large";
}

RouteTarget parse_route_target(std::string_view s) {
  if (s == "judgment") return RouteTarget::kJudgmentModel;
  if (s == "small") return RouteTarget::kSmallModel;
  if (s == "large") return RouteTarget::kLargeModel;
  fail(ErrorKind::kData, "unknown route target '" + std::string(s) + "'");
}

std::string_view to_string(SecondGate g) {
  return g == SecondGate::kSmallConfidence ? "small_confidence" : "large_confidence";
}

SecondGate parse_second_gate(std::string_view s) {
  if (s == "small_confidence") return SecondGate::kSmallConfidence;
  if (s == "large_confidence") return SecondGate::kLargeConfidence;
  fail(ErrorKind::kConfig, "second_gate must be small_confidence or large_confidence");
}

std::string_view to_string(DistillSchedule s) {
  return s == DistillSchedule::kAlternate ? "alternate" : "mixed";
}

DistillSchedule parse_distill_schedule(std::string_view s) {
  if (s == "alternate") return DistillSchedule::kAlternate;
  if (s == "mixed") return DistillSchedule::kMixed;
  fail(ErrorKind::kConfig, "schedule must be alternate or mixed");
}

Confidence confidence(std::span<const double> logits, ConfidenceSource source) {
  require(!logits.empty(), ErrorKind::kInvalidArgument, "confidence of empty logits");
  require(all_finite(logits), ErrorKind::kNumerical, "confidence of non-finite logits");
  const double zmax = *std::max_element(logits.begin(), logits.end());
  Confidence c;
  c.distribution.resize(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    c.distribution[i] = std::exp(logits[i] - zmax);
    sum += c.distribution[i];
  }
  for (double& p : c.distribution) p /= sum;
  c.score.value = *std::max_element(c.distribution.begin(), c.distribution.end());
  c.score.source = source;
  return c;
}

namespace {

constexpr double kProbabilityFloor = 1e-12;

void RequireDistribution(std::span<const double> p, const char* name) {
  double sum = 0.0;
  for (double v : p) {
    require(std::isfinite(v) && v >= 0.0, ErrorKind::kInvalidArgument,
            std::string(name) + " has a negative or non-finite entry");
    sum += v;
  }
  require(std::abs(sum - 1.0) <= 1e-9, ErrorKind::kInvalidArgument,
          std::string(name) + " does not sum to 1");
}

double KlUnchecked(std::span<const double> p, std::span<const double> q) {
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    total += p[i] * std::log(p[i] / std::max(q[i], kProbabilityFloor));
  }
  return std::max(total, 0.0);
}

}  // namespace

double kl_loss(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size() && !p.empty(), ErrorKind::kInvalidArgument,
          "kl_loss arguments differ in length");
  RequireDistribution(p, "kl_loss p");
  RequireDistribution(q, "kl_loss q");
  return KlUnchecked(p, q);
}

double distillation_loss(std::span<const double> student_logits, std::span<const double> teacher,
                         KlDirection direction, std::span<double> grad) {
  require(student_logits.size() == teacher.size() && grad.size() == teacher.size(),
          ErrorKind::kInvalidArgument, "distillation target width mismatch");
  const std::vector<double> s = confidence(student_logits).distribution;
  if (direction == KlDirection::kTeacherFirst) {
    for (std::size_t j = 0; j < s.size(); ++j) grad[j] = s[j] - teacher[j];
    return KlUnchecked(teacher, s);
  }
  // d/dz_j sum_i s_i ln(s_i / t_i) = s_j (ln(s_j / t_j) - KL)
  const double kl = KlUnchecked(s, teacher);
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (s[j] <= 0.0) {
      grad[j] = 0.0;
      continue;
    }
    grad[j] = s[j] * (std::log(s[j] / std::max(teacher[j], kProbabilityFloor)) - kl);
  }
  return kl;
}

PromptAugmentation build_prompt(std::uint64_t sample_id, std::span<const double> small_distribution,
                                double confidence_value, std::span<const std::string> class_names,
                                int top_k) {
  std::vector<int> order(small_distribution.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return small_distribution[a] > small_distribution[b];
  });
  PromptAugmentation p;
  p.sample_id = sample_id;
  p.small_model_confidence = confidence_value;
  const int keep = std::min<int>(std::max(top_k, 1), static_cast<int>(order.size()));
  for (int r = 0; r < keep; ++r) {
    const int c = order[r];
    std::string name = c < static_cast<int>(class_names.size()) ? class_names[c]
                                                                : "class_" + std::to_string(c);
    p.small_model_top_classes.push_back({c, std::move(name), small_distribution[c]});
  }
  std::string text = "Note from the collaborating small model: the confidence of the small model is ";
  text += format_fixed(confidence_value, 4);
  text += ". Its ranked guesses are: ";
  for (std::size_t r = 0; r < p.small_model_top_classes.size(); ++r) {
    const RankedClass& rc = p.small_model_top_classes[r];
    if (r > 0) text += ", ";
    text += rc.name + " (" + format_fixed(rc.probability, 4) + ")";
  }
  text +=
      ". The small model is reliable on the classes it is confident about and was not confident "
      "here, so pay less attention to those classes when deciding.";
  p.template_text = std::move(text);
  return p;
}

RouteTarget decide(double c_x, std::optional<double> c_second, double epsilon) {
  if (c_x > epsilon) return RouteTarget::kJudgmentModel;
  if (c_second.has_value() && *c_second > epsilon) return RouteTarget::kSmallModel;
  return RouteTarget::kLargeModel;
}

void validate(const RouteConfig& config) {
  require(config.epsilon >= 0.0 && config.epsilon <= 1.0, ErrorKind::kConfig,
          "epsilon must lie in [0, 1]");
  require(config.threads >= 1 && config.max_in_flight >= 1, ErrorKind::kConfig,
          "threads and max_in_flight must be positive");
}

namespace {

void CheckCompatible(const Sample& sample, const ClassifierHandle& judgment,
                     const ClassifierHandle& small) {
  require(static_cast<int>(sample.features.size()) == judgment.input_dim() &&
              static_cast<int>(sample.features.size()) == small.input_dim(),
          ErrorKind::kInvalidArgument,
          "sample " + std::to_string(sample.id) + " has " + std::to_string(sample.features.size()) +
              " features; models expect " + std::to_string(judgment.input_dim()));
  require(judgment.label_count() == small.label_count(), ErrorKind::kInvalidArgument,
          "judgment and small models disagree on the label count");
}

int Argmax(std::span<const double> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::int64_t NowNs() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

RoutingDecision route(const Sample& sample, const ClassifierHandle& judgment,
                      const ClassifierHandle& small, const RouteConfig& config) {
  CheckCompatible(sample, judgment, small);
  RoutingDecision d;
  const Confidence cx = confidence(judgment.logits(sample.features), ConfidenceSource::kJudgment);
  d.confidence_trace.push_back(cx.score);
  if (cx.score.value > config.epsilon) {
    d.target = RouteTarget::kJudgmentModel;
    return d;
  }
  const Confidence cs = confidence(small.logits(sample.features), ConfidenceSource::kSmall);
  d.confidence_trace.push_back(cs.score);
  d.target = decide(cx.score.value, cs.score.value, config.epsilon);
  return d;
}

void validate(const DistillationConfig& c) {
  require(c.epsilon > 0.0 && c.epsilon < 1.0, ErrorKind::kConfig, "epsilon must lie in (0, 1)");
  require(c.learning_rate > 0.0, ErrorKind::kConfig, "learning_rate must be positive");
  require(c.epochs >= 1, ErrorKind::kConfig, "epochs must be at least 1");
  require(c.batch_size >= 1, ErrorKind::kConfig, "batch_size must be at least 1");
  require(c.loss_mix >= 0.0 && c.loss_mix <= 1.0, ErrorKind::kConfig, "loss_mix must lie in [0, 1]");
  require(c.max_grad_norm >= 0.0, ErrorKind::kConfig, "max_grad_norm must be nonnegative");
}

void validate(const TrainingPartition& p, std::span<const Sample> train) {
  std::vector<std::uint64_t> all;
  all.insert(all.end(), p.x1.begin(), p.x1.end());
  all.insert(all.end(), p.x2.begin(), p.x2.end());
  all.insert(all.end(), p.x3.begin(), p.x3.end());
  std::sort(all.begin(), all.end());
  require(std::adjacent_find(all.begin(), all.end()) == all.end(), ErrorKind::kData,
          "training partition sets overlap");
  std::vector<std::uint64_t> ids;
  for (const Sample& s : train) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());
  require(all == ids, ErrorKind::kData, "training partition does not cover the training set");
  require(p.teacher_targets.size() == p.x2.size(), ErrorKind::kData,
          "teacher targets do not match x2");
  for (std::uint64_t id : p.x2) {
    auto it = p.teacher_targets.find(id);
    require(it != p.teacher_targets.end(), ErrorKind::kData,
            "x2 sample " + std::to_string(id) + " has no teacher distribution");
    const double sum = std::accumulate(it->second.begin(), it->second.end(), 0.0);
    require(std::abs(sum - 1.0) <= 1e-9, ErrorKind::kData,
            "teacher distribution for sample " + std::to_string(id) + " does not sum to 1");
  }
}

TrainingPartition partition_training(std::span<const Sample> train,
                                     const ClassifierHandle& judgment, LargeModelBackend& backend,
                                     const DistillationConfig& config,
                                     std::span<const std::string> class_names,
                                     const WarningSink& warn) {
  validate(config);
  TrainingPartition p;
  if (train.empty()) return p;
  const Matrix logits = judgment.logits(feature_matrix(train));
  for (std::size_t n = 0; n < train.size(); ++n) {
    const Sample& s = train[n];
    const Confidence cx = confidence(logits.row(n), ConfidenceSource::kJudgment);
    if (cx.score.value > config.epsilon) {
      p.x1.push_back(s.id);
      continue;
    }
    const PromptAugmentation prompt =
        build_prompt(s.id, cx.distribution, cx.score.value, class_names, config.prompt_top_k);
    try {
      LargeModelResponse r = backend.predict(s, prompt);
      validate_response(r, judgment.label_count());
      if (r.confidence > config.epsilon) {
        p.x2.push_back(s.id);
        p.teacher_targets.emplace(s.id, std::move(r.distribution));
      } else {
        p.x3.push_back(s.id);
      }
    } catch (const BackendError& e) {
      p.x3.push_back(s.id);
      std::string msg = "sample " + std::to_string(s.id) + " diverted to x3: backend " +
                        std::string(to_string(e.failure())) + ": " + e.what();
      if (warn)
        warn(msg);
      else
        std::cerr << "warning: " << msg << "\n";
      p.warnings.push_back(std::move(msg));
    }
  }
  return p;
}

namespace {

struct DistillItem {
  std::size_t row;      // row in the normalized feature matrix
  const double* target; // teacher distribution
  double weight;
};

double RunDistillEpoch(ClassifierHandle& student, const Matrix& features,
                       std::vector<DistillItem>& items, const DistillationConfig& config,
                       std::mt19937_64& rng) {
  std::shuffle(items.begin(), items.end(), rng);
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  const std::size_t width = static_cast<std::size_t>(student.label_count());
  double total = 0.0;
  for (std::size_t start = 0; start < items.size(); start += bs) {
    const std::size_t end = std::min(items.size(), start + bs);
    const std::size_t b = end - start;
    Matrix batch(b, features.cols());
    for (std::size_t q = 0; q < b; ++q) {
      auto src = features.row(items[start + q].row);
      std::copy(src.begin(), src.end(), batch.row(q).begin());
    }
    const double loss = sgd_step(
        student.network(), batch,
        [&](const Matrix& z, Matrix& grad) {
          double sum = 0.0;
          for (std::size_t q = 0; q < b; ++q) {
            const DistillItem& it = items[start + q];
            std::span<double> g = grad.row(q);
            const double l = distillation_loss(z.row(q), {it.target, width}, config.kl_direction, g);
            const double scale = it.weight / static_cast<double>(b);
            for (double& v : g) v *= scale;
            sum += it.weight * l;
          }
          return sum / static_cast<double>(b);
        },
        config.learning_rate, config.max_grad_norm);
    if (!std::isfinite(loss)) return loss;
    total += loss * static_cast<double>(b);
  }
  return items.empty() ? 0.0 : total / static_cast<double>(items.size());
}

}  // namespace

ClassifierHandle train_kcm(const TrainingPartition& partition, std::span<const Sample> train,
                           const ClassifierHandle& judgment, const DistillationConfig& config) {
  validate(config);
  validate(partition, train);
  ClassifierHandle student = clone_model(judgment);
  student.loss_curve.clear();

  std::unordered_map<std::uint64_t, std::size_t> index;
  for (std::size_t n = 0; n < train.size(); ++n) index.emplace(train[n].id, n);

  std::vector<Sample> rows;
  for (std::uint64_t id : partition.x1) rows.push_back(train[index.at(id)]);
  for (std::uint64_t id : partition.x2) rows.push_back(train[index.at(id)]);
  if (rows.empty()) return student;

  const Matrix raw = feature_matrix(rows);
  const Matrix features = judgment.normalize(raw);
  const std::size_t width = static_cast<std::size_t>(judgment.label_count());

  // Judgment-model targets for x1; cached large-model targets for x2.
  std::vector<double> targets(rows.size() * width);
  const std::size_t n1 = partition.x1.size();
  if (n1 > 0) {
    const Matrix jl = judgment.logits(raw);
    for (std::size_t q = 0; q < n1; ++q) {
      const auto d = confidence(jl.row(q)).distribution;
      std::copy(d.begin(), d.end(), targets.begin() + q * width);
    }
  }
  for (std::size_t q = 0; q < partition.x2.size(); ++q) {
    const auto& d = partition.teacher_targets.at(partition.x2[q]);
    require(d.size() == width, ErrorKind::kData, "teacher distribution width mismatch");
    std::copy(d.begin(), d.end(), targets.begin() + (n1 + q) * width);
  }

  const double w_large = 2.0 * config.loss_mix;
  const double w_judge = 2.0 * (1.0 - config.loss_mix);
  std::vector<DistillItem> x1_items;
  std::vector<DistillItem> x2_items;
  for (std::size_t q = 0; q < rows.size(); ++q) {
    DistillItem it{q, targets.data() + q * width, q < n1 ? w_judge : w_large};
    (q < n1 ? x1_items : x2_items).push_back(it);
  }
  std::vector<DistillItem> mixed = x1_items;
  mixed.insert(mixed.end(), x2_items.begin(), x2_items.end());

  std::mt19937_64 rng(config.seed);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double loss = 0.0;
    if (config.schedule == DistillSchedule::kMixed) {
      loss = RunDistillEpoch(student, features, mixed, config, rng);
    } else {
      bool large_turn = epoch % 2 == 0;
      if (x2_items.empty()) large_turn = false;
      if (x1_items.empty()) large_turn = true;
      loss = RunDistillEpoch(student, features, large_turn ? x2_items : x1_items, config, rng);
    }
    require(std::isfinite(loss), ErrorKind::kNumerical,
            "distillation diverged at epoch " + std::to_string(epoch));
    student.loss_curve.push_back(loss);
  }
  for (auto block : std::visit([](auto& n) { return n.parameter_blocks(); }, student.network()))
    require(all_finite(block), ErrorKind::kNumerical, "distillation produced non-finite parameters");
  return student;
}

void DecisionLog::append(DecisionRecord record) {
  std::lock_guard lock(mu_);
  records_.push_back(std::move(record));
}

std::vector<DecisionRecord> DecisionLog::records() const {
  std::lock_guard lock(mu_);
  std::vector<DecisionRecord> out = records_;
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.sample_id < b.sample_id; });
  return out;
}

std::size_t DecisionLog::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

std::string DecisionLog::to_ndjson(bool include_timestamps) const {
  std::string out;
  for (const DecisionRecord& r : records()) {
    nlohmann::ordered_json j;
    j["sample_id"] = r.sample_id;
    j["target"] = std::string(to_string(r.target));
    j["c_x"] = r.c_x;
    j["c_s"] = r.c_s ? nlohmann::ordered_json(*r.c_s) : nlohmann::ordered_json(nullptr);
    j["c_l"] = r.c_l ? nlohmann::ordered_json(*r.c_l) : nlohmann::ordered_json(nullptr);
    j["degraded"] = r.degraded;
    j["prediction"] = r.prediction;
    if (include_timestamps) j["timestamp_ns"] = r.timestamp_ns;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<DecisionRecord> DecisionLog::parse_ndjson(std::string_view text) {
  std::vector<DecisionRecord> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      DecisionRecord r;
      r.sample_id = j.at("sample_id").get<std::uint64_t>();
      r.target = parse_route_target(j.at("target").get<std::string>());
      r.c_x = j.at("c_x").get<double>();
      if (!j.at("c_s").is_null()) r.c_s = j["c_s"].get<double>();
      if (j.contains("c_l") && !j["c_l"].is_null()) r.c_l = j["c_l"].get<double>();
      r.degraded = j.at("degraded").get<bool>();
      r.prediction = j.at("prediction").get<int>();
      if (j.contains("timestamp_ns")) r.timestamp_ns = j["timestamp_ns"].get<std::int64_t>();
      out.push_back(r);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kData, "decision log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

InferenceResult infer(const Sample& sample, const ClassifierHandle& judgment,
                      const ClassifierHandle& small, LargeModelBackend& backend,
                      const RouteConfig& config, std::span<const std::string> class_names,
                      DecisionLog* log) {
  validate(config);
  CheckCompatible(sample, judgment, small);
  InferenceResult result;
  DecisionRecord rec;
  rec.sample_id = sample.id;

  const Confidence cx = confidence(judgment.logits(sample.features), ConfidenceSource::kJudgment);
  rec.c_x = cx.score.value;
  result.decision.confidence_trace.push_back(cx.score);

  if (cx.score.value > config.epsilon) {
    result.decision.target = RouteTarget::kJudgmentModel;
    result.prediction = Argmax(cx.distribution);
  } else {
    const Confidence cs = confidence(small.logits(sample.features), ConfidenceSource::kSmall);
    rec.c_s = cs.score.value;
    const int small_prediction = Argmax(cs.distribution);
    auto call_large = [&]() -> std::optional<LargeModelResponse> {
      result.prompt = build_prompt(sample.id, cs.distribution, cx.score.value, class_names,
                                   config.prompt_top_k);
      try {
        LargeModelResponse r = backend.predict(sample, *result.prompt);
        validate_response(r, small.label_count());
        return r;
      } catch (const BackendError&) {
        return std::nullopt;
      }
    };

    if (config.second_gate == SecondGate::kSmallConfidence) {
      result.decision.confidence_trace.push_back(cs.score);
      result.decision.target = decide(cx.score.value, cs.score.value, config.epsilon);
      if (result.decision.target == RouteTarget::kSmallModel) {
        result.prediction = small_prediction;
      } else if (auto r = call_large()) {
        result.prediction = Argmax(r->distribution);
      } else {
        result.prediction = small_prediction;
        result.decision.degraded = true;
      }
    } else {
      auto r = call_large();
      if (!r) {
        result.decision.target = RouteTarget::kLargeModel;
        result.prediction = small_prediction;
        result.decision.degraded = true;
      } else {
        rec.c_l = r->confidence;
        result.decision.confidence_trace.push_back({r->confidence, ConfidenceSource::kLarge});
        result.decision.target = decide(cx.score.value, r->confidence, config.epsilon);
        result.prediction = result.decision.target == RouteTarget::kSmallModel
                                ? small_prediction
                                : Argmax(r->distribution);
      }
    }
  }

  rec.target = result.decision.target;
  rec.degraded = result.decision.degraded;
  rec.prediction = result.prediction;
  rec.timestamp_ns = NowNs();
  if (log != nullptr) log->append(rec);
  return result;
}

namespace {

// Caps the number of concurrent calls into the wrapped backend.
class ThrottledBackend final : public LargeModelBackend {
 public:
  ThrottledBackend(LargeModelBackend& inner, int max_in_flight)
      : inner_(inner), slots_(max_in_flight) {}
  LargeModelResponse predict(const Sample& sample, const PromptAugmentation& prompt) override {
    slots_.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{slots_};
    return inner_.predict(sample, prompt);
  }
  std::string name() const override { return inner_.name(); }

 private:
  LargeModelBackend& inner_;
  std::counting_semaphore<> slots_;
};

}  // namespace

std::vector<InferenceResult> infer_batch(std::span<const Sample> samples,
                                         const ClassifierHandle& judgment,
                                         const ClassifierHandle& small, LargeModelBackend& backend,
                                         const RouteConfig& config,
                                         std::span<const std::string> class_names,
                                         DecisionLog* log) {
  validate(config);
  std::vector<InferenceResult> results(samples.size());
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(config.threads), std::max<std::size_t>(samples.size(), 1));
  if (workers <= 1) {
    for (std::size_t n = 0; n < samples.size(); ++n)
      results[n] = infer(samples[n], judgment, small, backend, config, class_names, log);
    return results;
  }

  ThrottledBackend throttled(backend, config.max_in_flight);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        try {
          for (std::size_t n = next++; n < samples.size(); n = next++)
            results[n] = infer(samples[n], judgment, small, throttled, config, class_names, log);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
  return results;
}

}  // namespace kcm
