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

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "kcm/classifier.hpp"
#include "test_util.hpp"

namespace kcm {
namespace {

// Balanced, well separated 4-class problem.
Dataset Separable(std::uint64_t seed) {
  LongTailSpec spec;
  spec.num_classes = 4;
  spec.feature_dim = 4;
  spec.max_per_class = 60;
  spec.imbalance = 1.0;
  spec.separation = 12.0;
  spec.test_per_class = 20;
  spec.seed = seed;
  return generate_longtail(spec);
}

ArchSpec Small(ModelKind kind) {
  ArchSpec arch;
  arch.kind = kind;
  arch.hidden = {8};
  return arch;
}

TEST_SUITE("models") {

TEST_CASE("both model kinds fit a separable set") {
  const Dataset ds = Separable(1);
  const auto train = ds.split(Split::kTrain);
  for (ModelKind kind : {ModelKind::kKan, ModelKind::kMlp}) {
    CAPTURE(to_string(kind));
    const ClassifierHandle h = train_supervised(train, 4, Small(kind), TrainOptions{30, 0.1, 16}, 3);
    CHECK(accuracy(h, train) >= 0.99);
    CHECK(h.loss_curve.size() == 30);
    CHECK(h.loss_curve.back() < h.loss_curve.front());
    CHECK(h.kind() == kind);
  }
}

TEST_CASE("an untrained model sits near chance") {
  const Dataset ds = Separable(2);
  const auto test = ds.split(Split::kTest);
  const ClassifierHandle h =
      train_supervised(ds.split(Split::kTrain), 4, Small(ModelKind::kKan), TrainOptions{0, 0.1, 16}, 5);
  CHECK(h.loss_curve.empty());
  CHECK(accuracy(h, test) < 0.6);
}

TEST_CASE("training is deterministic and the id stream is reproducible") {
  const Dataset ds = Separable(3);
  const auto train = ds.split(Split::kTrain);
  Fnv1a s1;
  Fnv1a s2;
  Fnv1a s3;
  const TrainOptions opts{5, 0.1, 16};
  const ClassifierHandle a = train_supervised(train, 4, Small(ModelKind::kKan), opts, 7, &s1);
  const ClassifierHandle b = train_supervised(train, 4, Small(ModelKind::kKan), opts, 7, &s2);
  CHECK(a == b);
  CHECK(a.loss_curve == b.loss_curve);
  CHECK(s1.hex() == s2.hex());
  const ClassifierHandle c = train_supervised(train, 4, Small(ModelKind::kKan), opts, 8, &s3);
  CHECK_FALSE(a == c);
  CHECK(s1.hex() != s3.hex());
  // The id stream is independent of the model kind.
  Fnv1a s4;
  train_supervised(train, 4, Small(ModelKind::kMlp), opts, 7, &s4);
  CHECK(s4.hex() == s1.hex());
}

TEST_CASE("a clone trains independently of its source") {
  const Dataset ds = Separable(4);
  const auto train = ds.split(Split::kTrain);
  const ClassifierHandle a =
      train_supervised(train, 4, Small(ModelKind::kKan), TrainOptions{2, 0.1, 16}, 1);
  const ClassifierHandle before = clone_model(a);
  ClassifierHandle b = clone_model(a);
  CHECK(b == a);
  fit_supervised(b, train, TrainOptions{2, 0.1, 16}, 2);
  CHECK_FALSE(b == a);
  CHECK(a == before);
}

TEST_CASE("save and load restore an identical classifier") {
  const Dataset ds = Separable(5);
  const auto train = ds.split(Split::kTrain);
  testing::TempDir dir("models");
  for (ModelKind kind : {ModelKind::kKan, ModelKind::kMlp}) {
    const ClassifierHandle h = train_supervised(train, 4, Small(kind), TrainOptions{2, 0.1, 16}, 1);
    save_classifier(dir.path(), "m", h);
    CHECK(std::filesystem::exists(dir.path() / "m.kcmn"));
    CHECK(std::filesystem::exists(dir.path() / "m.meta.json"));
    const ClassifierHandle back = load_classifier(dir.path(), "m");
    CHECK(back == h);
    const Matrix x = feature_matrix(train);
    CHECK(back.logits(x) == h.logits(x));
  }
}

TEST_CASE("cross entropy gradient is softmax minus one-hot over the batch") {
  Matrix logits(2, 3);
  logits(0, 0) = 1.0;
  logits(0, 1) = 2.0;
  logits(0, 2) = 3.0;
  logits(1, 0) = 0.0;
  const std::vector<int> labels{2, 0};
  Matrix grad;
  const double loss = cross_entropy(logits, labels, grad);
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  const double want = 0.5 * (-std::log(std::exp(3.0) / z) - std::log(1.0 / 3.0));
  CHECK(loss == doctest::Approx(want).epsilon(1e-12));
  CHECK(grad(0, 2) == doctest::Approx(0.5 * (std::exp(3.0) / z - 1.0)).epsilon(1e-12));
  CHECK(grad(1, 1) == doctest::Approx(0.5 / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(cross_entropy(logits, std::vector<int>{0, 9}, grad), Error);
}

TEST_CASE("gradient clipping bounds the step") {
  const MlpNetwork net = MlpNetwork::create({2, 3, 2}, 1);
  const Matrix x(1, 2, 1.0);
  const LossFn huge = [](const Matrix& z, Matrix& g) {
    g = Matrix(z.rows(), z.cols(), 1e6);
    return 1.0;
  };
  AnyNetwork clipped = net;
  sgd_step(clipped, x, huge, 1.0, 0.5);
  auto a = std::get<MlpNetwork>(clipped).parameter_blocks();
  MlpNetwork orig = net;
  auto o = orig.parameter_blocks();
  double sq = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l)
    for (std::size_t p = 0; p < a[l].size(); ++p) sq += (a[l][p] - o[l][p]) * (a[l][p] - o[l][p]);
  CHECK(std::sqrt(sq) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("normalization maps spread standard deviations onto the grid") {
  Matrix f(4, 1);
  f(0, 0) = 1;
  f(1, 0) = 3;
  f(2, 0) = 5;
  f(3, 0) = 7;
  const Normalization n = Normalization::fit(f, 3.0, -1.0, 1.0);
  CHECK(n.mean[0] == doctest::Approx(4.0));
  const Matrix g = n.apply(f);
  const double sd = std::sqrt(5.0);
  CHECK(g(3, 0) == doctest::Approx(3.0 / sd / 3.0));
}

}  // TEST_SUITE

}  // namespace
}  // namespace kcm
