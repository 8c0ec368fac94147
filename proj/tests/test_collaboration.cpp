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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "doctest.h"
#include "kcm/collaboration.hpp"

namespace kcm {
namespace {

// Backend with a scripted answer: a fixed distribution, or a failure.
class ScriptedBackend final : public LargeModelBackend {
 public:
  explicit ScriptedBackend(std::vector<double> answer) : answer_(std::move(answer)) {}
  LargeModelResponse predict(const Sample& sample, const PromptAugmentation& prompt) override {
    std::lock_guard lock(mu_);
    ids.push_back(sample.id);
    prompts.push_back(prompt.template_text);
    const int now = ++in_flight_;
    peak = std::max(peak, now);
    mu_.unlock();
    std::this_thread::sleep_for(std::chrono::microseconds(200));
    mu_.lock();
    --in_flight_;
    if (fail) throw BackendError(BackendFailure::kTimeout, "scripted timeout");
    LargeModelResponse r;
    r.distribution = answer_;
    r.cost_units = 1.0;
    return r;
  }
  std::string name() const override { return "scripted"; }

  bool fail = false;
  std::vector<std::uint64_t> ids;
  std::vector<std::string> prompts;
  int peak = 0;

 private:
  std::vector<double> answer_;
  std::mutex mu_;
  int in_flight_ = 0;
};

struct Fixture {
  Dataset ds;
  std::vector<Sample> train;
  std::vector<Sample> test;
  ClassifierHandle judgment;
  ClassifierHandle small;
};

const Fixture& Shared() {
  static const Fixture f = [] {
    LongTailSpec spec;
    spec.num_classes = 5;
    spec.feature_dim = 5;
    spec.max_per_class = 80;
    spec.imbalance = 10;
    spec.separation = 3.0;
    spec.test_per_class = 20;
    spec.seed = 6;
    Dataset ds = generate_longtail(spec);
    std::vector<Sample> train = ds.split(Split::kTrain);
    std::vector<Sample> test = ds.split(Split::kTest);
    ArchSpec arch;
    arch.hidden = {8};
    ClassifierHandle judgment = train_supervised(train, 5, arch, TrainOptions{15, 0.1, 16}, 1);
    ClassifierHandle small = train_supervised(train, 5, arch, TrainOptions{25, 0.1, 16}, 2);
    Fixture x{std::move(ds), std::move(train), std::move(test), std::move(judgment), std::move(small)};
    return x;
  }();
  return f;
}

TEST_SUITE("collaboration") {

TEST_CASE("confidence is the softmax maximum") {
  const std::vector<double> z{4.0, 0.0};
  const Confidence c = confidence(z);
  CHECK(std::abs(c.score.value - 0.982014) < 1e-6);
  CHECK(c.score.value == doctest::Approx(std::exp(4.0) / (std::exp(4.0) + 1.0)).epsilon(1e-15));
  const Confidence big = confidence(std::vector<double>{1000.0, 0.0});
  CHECK(std::isfinite(big.distribution[1]));
  CHECK(big.score.value == 1.0);
  CHECK(confidence(std::vector<double>{0.0, 0.0, 0.0}).score.value == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(confidence(std::vector<double>{}), Error);
  CHECK_THROWS_AS(confidence(std::vector<double>{NAN, 1.0}), Error);
}

TEST_CASE("KL divergence values") {
  CHECK(std::abs(kl_loss(std::vector<double>{1.0, 0.0}, std::vector<double>{0.5, 0.5}) -
                 std::log(2.0)) < 1e-9);
  CHECK(kl_loss(std::vector<double>{0.3, 0.7}, std::vector<double>{0.3, 0.7}) == 0.0);
  CHECK(std::isfinite(kl_loss(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 0.0})));
  CHECK_THROWS_AS(kl_loss(std::vector<double>{0.5, 0.6}, std::vector<double>{0.5, 0.5}), Error);
  CHECK_THROWS_AS(kl_loss(std::vector<double>{1.0}, std::vector<double>{0.5, 0.5}), Error);
}

TEST_CASE("distillation gradients match central differences in both directions") {
  const std::vector<double> t{0.1, 0.6, 0.3};
  std::vector<double> z{0.2, -0.4, 1.1};
  for (KlDirection dir : {KlDirection::kStudentFirst, KlDirection::kTeacherFirst}) {
    std::vector<double> g(3);
    distillation_loss(z, t, dir, g);
    for (int j = 0; j < 3; ++j) {
      std::vector<double> up = z;
      std::vector<double> down = z;
      up[j] += 1e-6;
      down[j] -= 1e-6;
      std::vector<double> scratch(3);
      const double fd = (distillation_loss(up, t, dir, scratch) -
                         distillation_loss(down, t, dir, scratch)) / 2e-6;
      CHECK(g[j] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("gate decisions use strict inequalities") {
  CHECK(decide(0.99, std::nullopt, 0.98) == RouteTarget::kJudgmentModel);
  CHECK(decide(0.98, 0.99, 0.98) == RouteTarget::kSmallModel);
  CHECK(decide(0.5, 0.98, 0.98) == RouteTarget::kLargeModel);
  CHECK(decide(0.5, std::nullopt, 0.98) == RouteTarget::kLargeModel);
  CHECK(decide(1.0, 1.0, 1.0) == RouteTarget::kLargeModel);
  CHECK(decide(0.0, 0.0, 0.0) == RouteTarget::kLargeModel);
  CHECK(decide(0.01, 0.0, 0.0) == RouteTarget::kJudgmentModel);
}

TEST_CASE("prompt text is fixed and deterministic") {
  const std::vector<std::string> names{"head_0", "med_1", "tail_2", "tail_3"};
  const std::vector<double> dist{0.1, 0.4, 0.4, 0.1};
  const PromptAugmentation p = build_prompt(7, dist, 0.55, names, 3);
  CHECK(p.template_text ==
        "Note from the collaborating small model: the confidence of the small model is 0.5500. "
        "Its ranked guesses are: med_1 (0.4000), tail_2 (0.4000), head_0 (0.1000). The small "
        "model is reliable on the classes it is confident about and was not confident here, so "
        "pay less attention to those classes when deciding.");
  REQUIRE(p.small_model_top_classes.size() == 3);
  CHECK(p.small_model_top_classes[0].index == 1);
  CHECK(p.small_model_top_classes[1].index == 2);
  CHECK(p.small_model_top_classes[2].index == 0);
  CHECK(build_prompt(7, dist, 0.55, names, 3).template_text == p.template_text);
  CHECK(build_prompt(7, dist, 0.55, names, 10).small_model_top_classes.size() == 4);
}

TEST_CASE("route never calls the large model and reports both scores") {
  const Fixture& f = Shared();
  RouteConfig cfg;
  for (const Sample& s : f.test) {
    const RoutingDecision d = route(s, f.judgment, f.small, cfg);
    REQUIRE_FALSE(d.confidence_trace.empty());
    if (d.target == RouteTarget::kJudgmentModel) {
      CHECK(d.confidence_trace.size() == 1);
      CHECK(d.confidence_trace[0].value > cfg.epsilon);
    } else {
      CHECK(d.confidence_trace.size() == 2);
      CHECK(d.confidence_trace[1].source == ConfidenceSource::kSmall);
    }
  }
}

TEST_CASE("training partition covers every sample exactly once") {
  const Fixture& f = Shared();
  ScriptedBackend teacher({0.99, 0.0025, 0.0025, 0.0025, 0.0025});
  DistillationConfig cfg;
  cfg.epsilon = 0.9;
  const TrainingPartition p = partition_training(f.train, f.judgment, teacher, cfg, f.ds.class_names);
  validate(p, f.train);
  CHECK(p.x1.size() + p.x2.size() + p.x3.size() == f.train.size());
  CHECK(p.x3.empty());
  CHECK(teacher.ids.size() == p.x2.size());

  ScriptedBackend unsure({0.2, 0.2, 0.2, 0.2, 0.2});
  const TrainingPartition q = partition_training(f.train, f.judgment, unsure, cfg, f.ds.class_names);
  CHECK(q.x2.empty());
  CHECK(q.x1 == p.x1);
  CHECK(q.x3 == p.x2);

  ScriptedBackend broken({1.0});
  broken.fail = true;
  std::vector<std::string> warnings;
  const TrainingPartition r = partition_training(f.train, f.judgment, broken, cfg, f.ds.class_names,
                                                 [&](const std::string& w) { warnings.push_back(w); });
  validate(r, f.train);
  CHECK(r.x3 == p.x2);
  CHECK(warnings.size() == r.x3.size());
  CHECK(warnings.front().find("timeout") != std::string::npos);
}

TEST_CASE("partition validation catches overlap and gaps") {
  const Fixture& f = Shared();
  TrainingPartition p;
  for (const Sample& s : f.train) p.x1.push_back(s.id);
  validate(p, f.train);
  p.x3.push_back(p.x1.front());
  CHECK_THROWS_AS(validate(p, f.train), Error);
  p.x3.clear();
  p.x1.pop_back();
  CHECK_THROWS_AS(validate(p, f.train), Error);
}

TEST_CASE("distillation with nothing to learn returns the judgment model bit for bit") {
  const Fixture& f = Shared();
  TrainingPartition p;
  for (const Sample& s : f.train) p.x3.push_back(s.id);
  const ClassifierHandle s = train_kcm(p, f.train, f.judgment, DistillationConfig{});
  CHECK(s == f.judgment);
  CHECK(s.loss_curve.empty());
}

TEST_CASE("the judgment model is a fixed point of its own distillation") {
  const Fixture& f = Shared();
  TrainingPartition p;
  for (const Sample& s : f.train) p.x1.push_back(s.id);
  DistillationConfig cfg;
  cfg.epochs = 3;
  const ClassifierHandle s = train_kcm(p, f.train, f.judgment, cfg);
  for (double loss : s.loss_curve) CHECK(loss < 1e-12);
  const Matrix x = feature_matrix(f.test);
  const Matrix a = s.logits(x);
  const Matrix b = f.judgment.logits(x);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  CHECK(worst < 1e-8);
}

TEST_CASE("distillation pulls x2 samples toward the teacher") {
  const Fixture& f = Shared();
  ScriptedBackend teacher({0.99, 0.0025, 0.0025, 0.0025, 0.0025});
  DistillationConfig cfg;
  cfg.epsilon = 0.9;
  cfg.epochs = 20;
  const TrainingPartition p = partition_training(f.train, f.judgment, teacher, cfg, f.ds.class_names);
  REQUIRE_FALSE(p.x2.empty());
  const ClassifierHandle s = train_kcm(p, f.train, f.judgment, cfg);
  CHECK(s.loss_curve.size() == 20);
  std::vector<Sample> x2;
  for (const Sample& smp : f.train)
    if (std::find(p.x2.begin(), p.x2.end(), smp.id) != p.x2.end()) x2.push_back(smp);
  auto class0 = [&](const ClassifierHandle& h) {
    const auto pred = h.predict(feature_matrix(x2));
    return std::count(pred.begin(), pred.end(), 0);
  };
  CHECK(class0(s) > class0(f.judgment));
  // Same inputs, same seed: same student.
  CHECK(train_kcm(p, f.train, f.judgment, cfg) == s);
}

TEST_CASE("infer follows the gates and falls back when the backend fails") {
  const Fixture& f = Shared();
  ScriptedBackend backend({0.0, 0.0, 0.0, 0.0, 1.0});
  RouteConfig cfg;
  DecisionLog log;
  const auto results = infer_batch(f.test, f.judgment, f.small, backend, cfg, f.ds.class_names, &log);
  std::size_t large = 0;
  for (std::size_t n = 0; n < results.size(); ++n) {
    const auto& r = results[n];
    if (r.decision.target == RouteTarget::kLargeModel) {
      ++large;
      CHECK(r.prediction == 4);
      REQUIRE(r.prompt.has_value());
    } else {
      CHECK_FALSE(r.prompt.has_value());
    }
  }
  CHECK(backend.ids.size() == large);
  CHECK(log.size() == f.test.size());
  const auto records = log.records();
  CHECK(std::count_if(records.begin(), records.end(), [](const DecisionRecord& r) {
          return r.target == RouteTarget::kLargeModel;
        }) == static_cast<long>(large));

  backend.fail = true;
  for (const Sample& s : f.test) {
    const InferenceResult r = infer(s, f.judgment, f.small, backend, cfg, f.ds.class_names);
    if (r.decision.target == RouteTarget::kLargeModel) {
      CHECK(r.decision.degraded);
      const auto cs = confidence(f.small.logits(s.features));
      CHECK(r.prediction == std::max_element(cs.distribution.begin(), cs.distribution.end()) -
                                cs.distribution.begin());
    } else {
      CHECK_FALSE(r.decision.degraded);
    }
  }
}

TEST_CASE("epsilon extremes route everything one way") {
  const Fixture& f = Shared();
  ScriptedBackend backend({0.0, 0.0, 0.0, 0.0, 1.0});
  RouteConfig cfg;
  cfg.epsilon = 1.0;
  for (const auto& r : infer_batch(f.test, f.judgment, f.small, backend, cfg, f.ds.class_names))
    CHECK(r.decision.target == RouteTarget::kLargeModel);
  cfg.epsilon = 0.0;
  backend.ids.clear();
  for (const auto& r : infer_batch(f.test, f.judgment, f.small, backend, cfg, f.ds.class_names))
    CHECK(r.decision.target == RouteTarget::kJudgmentModel);
  CHECK(backend.ids.empty());
}

TEST_CASE("large-model rate never decreases as epsilon rises") {
  const Fixture& f = Shared();
  ScriptedBackend backend({0.2, 0.2, 0.2, 0.2, 0.2});
  double previous = -1.0;
  for (double eps : {0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 0.98, 0.99, 1.0}) {
    RouteConfig cfg;
    cfg.epsilon = eps;
    std::size_t large = 0;
    for (const auto& r : infer_batch(f.test, f.judgment, f.small, backend, cfg, f.ds.class_names))
      large += r.decision.target == RouteTarget::kLargeModel;
    const double rate = static_cast<double>(large) / f.test.size();
    CHECK(rate >= previous);
    previous = rate;
  }
  CHECK(previous == 1.0);
}

TEST_CASE("literal second gate consults the large model's confidence") {
  const Fixture& f = Shared();
  ScriptedBackend confident({0.0, 0.0, 0.0, 0.0, 1.0});
  RouteConfig cfg;
  cfg.second_gate = SecondGate::kLargeConfidence;
  for (const Sample& s : f.test) {
    const InferenceResult r = infer(s, f.judgment, f.small, confident, cfg, f.ds.class_names);
    if (r.decision.target != RouteTarget::kJudgmentModel) {
      CHECK(r.decision.target == RouteTarget::kSmallModel);
      CHECK(r.decision.confidence_trace.back().source == ConfidenceSource::kLarge);
    }
  }
}

TEST_CASE("parallel inference matches serial inference and respects the in-flight cap") {
  const Fixture& f = Shared();
  RouteConfig serial;
  serial.epsilon = 0.999;
  ScriptedBackend a({0.1, 0.1, 0.1, 0.1, 0.6});
  DecisionLog la;
  infer_batch(f.test, f.judgment, f.small, a, serial, f.ds.class_names, &la);
  RouteConfig parallel = serial;
  parallel.threads = 8;
  parallel.max_in_flight = 2;
  ScriptedBackend b({0.1, 0.1, 0.1, 0.1, 0.6});
  DecisionLog lb;
  infer_batch(f.test, f.judgment, f.small, b, parallel, f.ds.class_names, &lb);
  CHECK(la.to_ndjson(false) == lb.to_ndjson(false));
  CHECK(b.peak <= 2);
  CHECK(b.ids.size() == a.ids.size());
}

TEST_CASE("decision log survives an NDJSON round trip") {
  DecisionLog log;
  DecisionRecord r;
  r.sample_id = 5;
  r.target = RouteTarget::kSmallModel;
  r.c_x = 0.1 + 0.2;
  r.c_s = 0.99;
  r.prediction = 3;
  r.timestamp_ns = 123;
  log.append(r);
  r.sample_id = 2;
  r.target = RouteTarget::kLargeModel;
  r.c_s.reset();
  r.degraded = true;
  log.append(r);
  const auto back = DecisionLog::parse_ndjson(log.to_ndjson());
  REQUIRE(back.size() == 2);
  CHECK(back[0].sample_id == 2);
  CHECK(back[0].degraded);
  CHECK_FALSE(back[0].c_s.has_value());
  CHECK(back[1].c_x == 0.1 + 0.2);
  CHECK(back[1].timestamp_ns == 123);
  CHECK(log.to_ndjson(false).find("timestamp") == std::string::npos);
  try {
    DecisionLog::parse_ndjson("{\"sample_id\":1}\nnot json\n");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("config validation") {
  RouteConfig r;
  r.epsilon = 1.5;
  CHECK_THROWS_AS(validate(r), Error);
  DistillationConfig d;
  d.loss_mix = -0.1;
  CHECK_THROWS_AS(validate(d), Error);
  d = DistillationConfig{};
  d.epsilon = 1.0;
  CHECK_THROWS_AS(validate(d), Error);
}

}  // TEST_SUITE

}  // namespace
}  // namespace kcm
