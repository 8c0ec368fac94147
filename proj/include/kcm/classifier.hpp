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

#ifndef KCM_CLASSIFIER_HPP_
#define KCM_CLASSIFIER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kcm/dataset.hpp"
#include "kcm/serialize.hpp"

namespace kcm {

enum class ModelKind { kKan, kMlp };
std::string_view to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view s);

struct ArchSpec {
  ModelKind kind = ModelKind::kKan;
  std::vector<int> hidden = {16, 16};
  int order = 3;
  int intervals = 5;
  double lo = -1.0;
  double hi = 1.0;
  // Standardized features are divided by this before clamping to [lo, hi],
  // so +-input_spread standard deviations span the grid.
  double input_spread = 3.0;
};

// Per-feature standardization, frozen after fitting.
struct Normalization {
  std::vector<double> mean;
  std::vector<double> scale;
  double lo = -1.0;
  double hi = 1.0;

  static Normalization fit(const Matrix& features, double spread, double lo, double hi);
  Matrix apply(const Matrix& raw) const;
  friend bool operator==(const Normalization&, const Normalization&) = default;
};

struct TrainOptions {
  int epochs = 100;
  double learning_rate = 0.1;
  int batch_size = 32;
};

// A trained (or trainable) classifier: network plus its frozen input
// conditioning. KAN and MLP handles expose the same surface.
class ClassifierHandle {
 public:
  ClassifierHandle(AnyNetwork net, int label_count, Normalization norm);

  ModelKind kind() const;
  int label_count() const noexcept { return label_count_; }
  int input_dim() const;
  const AnyNetwork& network() const noexcept { return net_; }
  AnyNetwork& network() noexcept { return net_; }
  const Normalization& normalization() const noexcept { return norm_; }
  std::size_t parameter_count() const;

  Matrix normalize(const Matrix& raw) const { return norm_.apply(raw); }
  Matrix logits(const Matrix& raw) const;
  std::vector<double> logits(std::span<const double> raw) const;
  std::vector<int> predict(const Matrix& raw) const;

  std::vector<double> loss_curve;

  friend bool operator==(const ClassifierHandle& a, const ClassifierHandle& b) {
    return a.label_count_ == b.label_count_ && a.norm_ == b.norm_ && a.net_ == b.net_;
  }

 private:
  AnyNetwork net_;
  int label_count_;
  Normalization norm_;
};

// Fills grad with d loss / d logits for a batch and returns the batch loss.
using LossFn = std::function<double(const Matrix& logits, Matrix& grad)>;

// One plain SGD step on already-normalized inputs. Returns the batch loss.
// A positive max_grad_norm rescales the whole gradient to at most that
// Euclidean norm before the update.
double sgd_step(AnyNetwork& net, const Matrix& inputs, const LossFn& loss, double learning_rate,
                double max_grad_norm = 0.0);

// Mean softmax cross-entropy and its gradient.
double cross_entropy(const Matrix& logits, std::span<const int> labels, Matrix& grad);

ClassifierHandle make_classifier(const ArchSpec& arch, const Normalization& norm, int label_count,
                                 std::uint64_t seed);

// Mini-batch SGD on softmax cross-entropy. Deterministic given seed. When
// stream is set, every batch's sample ids are fed into it in visiting order.
ClassifierHandle train_supervised(std::span<const Sample> train, int label_count,
                                  const ArchSpec& arch, const TrainOptions& options,
                                  std::uint64_t seed, Fnv1a* stream = nullptr);
// Continues cross-entropy training of an existing handle (normalization kept).
void fit_supervised(ClassifierHandle& handle, std::span<const Sample> train,
                    const TrainOptions& options, std::uint64_t seed, Fnv1a* stream = nullptr);

ClassifierHandle clone_model(const ClassifierHandle& handle);

double accuracy(const ClassifierHandle& handle, std::span<const Sample> samples);

// Writes <stem>.kcmn (network) and <stem>.meta.json (kind, label count,
// normalization).
void save_classifier(const std::filesystem::path& dir, const std::string& stem,
                     const ClassifierHandle& handle);
ClassifierHandle load_classifier(const std::filesystem::path& dir, const std::string& stem);

}  // namespace kcm

#endif  // KCM_CLASSIFIER_HPP_
