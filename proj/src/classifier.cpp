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

#include "kcm/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"
#include "kcm/simd.hpp"

namespace kcm {

std::string_view to_string(ModelKind k) { return k == ModelKind::kKan ? "kan" : "mlp"; }

ModelKind parse_model_kind(std::string_view s) {
  if (s == "kan") return ModelKind::kKan;
  if (s == "mlp") return ModelKind::kMlp;
  fail(ErrorKind::kConfig, "unknown model kind '" + std::string(s) + "'");
}

Normalization Normalization::fit(const Matrix& features, double spread, double lo, double hi) {
  require(features.rows() > 0, ErrorKind::kData, "cannot fit normalization on an empty set");
  require(spread > 0.0, ErrorKind::kConfig, "input_spread must be positive");
  Normalization n;
  n.lo = lo;
  n.hi = hi;
  const std::size_t d = features.cols();
  n.mean.assign(d, 0.0);
  n.scale.assign(d, 0.0);
  for (std::size_t r = 0; r < features.rows(); ++r)
    for (std::size_t f = 0; f < d; ++f) n.mean[f] += features(r, f);
  for (double& m : n.mean) m /= static_cast<double>(features.rows());
  for (std::size_t r = 0; r < features.rows(); ++r)
    for (std::size_t f = 0; f < d; ++f) {
      const double dv = features(r, f) - n.mean[f];
      n.scale[f] += dv * dv;
    }
  for (double& s : n.scale) {
    s = std::sqrt(s / static_cast<double>(features.rows()));
    if (!(s > 0.0)) s = 1.0;
    s *= spread;
  }
  return n;
}

Matrix Normalization::apply(const Matrix& raw) const {
  require(raw.cols() == mean.size(), ErrorKind::kInvalidArgument,
          "feature width " + std::to_string(raw.cols()) + " does not match model input " +
              std::to_string(mean.size()));
  Matrix out(raw.rows(), raw.cols());
  for (std::size_t r = 0; r < raw.rows(); ++r)
    for (std::size_t f = 0; f < raw.cols(); ++f) {
      const double x = raw(r, f);
      require(std::isfinite(x), ErrorKind::kData, "non-finite feature value");
      out(r, f) = std::clamp((x - mean[f]) / scale[f], lo, hi);
    }
  return out;
}

ClassifierHandle::ClassifierHandle(AnyNetwork net, int label_count, Normalization norm)
    : net_(std::move(net)), label_count_(label_count), norm_(std::move(norm)) {
  const int out = std::visit([](const auto& n) { return n.out_dim(); }, net_);
  const int in = std::visit([](const auto& n) { return n.in_dim(); }, net_);
  require(out == label_count_, ErrorKind::kInvalidArgument,
          "classifier output width does not match label count");
  require(norm_.mean.size() == static_cast<std::size_t>(in) && norm_.scale.size() == norm_.mean.size(),
          ErrorKind::kInvalidArgument, "normalization width does not match network input");
}

ModelKind ClassifierHandle::kind() const {
  return std::holds_alternative<KanNetwork>(net_) ? ModelKind::kKan : ModelKind::kMlp;
}

int ClassifierHandle::input_dim() const {
  return std::visit([](const auto& n) { return n.in_dim(); }, net_);
}

std::size_t ClassifierHandle::parameter_count() const {
  return std::visit([](const auto& n) { return n.parameter_count(); }, net_);
}

Matrix ClassifierHandle::logits(const Matrix& raw) const {
  const Matrix x = norm_.apply(raw);
  return std::visit([&](const auto& n) { return n.forward(x); }, net_);
}

std::vector<double> ClassifierHandle::logits(std::span<const double> raw) const {
  Matrix out = logits(Matrix::from_row(raw));
  return {out.data().begin(), out.data().end()};
}

std::vector<int> ClassifierHandle::predict(const Matrix& raw) const {
  const Matrix z = logits(raw);
  std::vector<int> out(z.rows());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

double sgd_step(AnyNetwork& net, const Matrix& inputs, const LossFn& loss, double learning_rate,
                double max_grad_norm) {
  return std::visit(
      [&](auto& n) {
        ForwardCache cache;
        const Matrix z = n.forward(inputs, cache);
        Matrix grad(z.rows(), z.cols());
        const double value = loss(z, grad);
        if (!std::isfinite(value)) return value;
        Gradients g = n.zero_gradients();
        n.backward(cache, grad, g);
        double step = learning_rate;
        if (max_grad_norm > 0.0) {
          double sq = 0.0;
          for (const auto& block : g) sq += simd::dot(block, block);
          const double norm = std::sqrt(sq);
          if (norm > max_grad_norm) step *= max_grad_norm / norm;
        }
        auto blocks = n.parameter_blocks();
        for (std::size_t b = 0; b < blocks.size(); ++b) simd::axpy(-step, g[b], blocks[b]);
        return value;
      },
      net);
}

double cross_entropy(const Matrix& logits, std::span<const int> labels, Matrix& grad) {
  const std::size_t batch = logits.rows();
  require(labels.size() == batch, ErrorKind::kInvalidArgument, "one label per logit row required");
  for (int y : labels)
    require(y >= 0 && static_cast<std::size_t>(y) < logits.cols(), ErrorKind::kInvalidArgument,
            "label " + std::to_string(y) + " out of range");
  grad = Matrix(batch, logits.cols());
  double total = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    auto z = logits.row(r);
    const double zmax = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (double v : z) denom += std::exp(v - zmax);
    const double log_denom = std::log(denom);
    for (std::size_t c = 0; c < z.size(); ++c) {
      const double p = std::exp(z[c] - zmax - log_denom);
      grad(r, c) = (p - (static_cast<int>(c) == labels[r] ? 1.0 : 0.0)) / static_cast<double>(batch);
    }
    total -= z[labels[r]] - zmax - log_denom;
  }
  return total / static_cast<double>(batch);
}

ClassifierHandle make_classifier(const ArchSpec& arch, const Normalization& norm, int label_count,
                                 std::uint64_t seed) {
  std::vector<int> dims{static_cast<int>(norm.mean.size())};
  dims.insert(dims.end(), arch.hidden.begin(), arch.hidden.end());
  dims.push_back(label_count);
  if (arch.kind == ModelKind::kKan) {
    KanShape shape{dims, arch.order, arch.intervals, arch.lo, arch.hi};
    return ClassifierHandle(KanNetwork::create(shape, seed), label_count, norm);
  }
  return ClassifierHandle(MlpNetwork::create(dims, seed), label_count, norm);
}

void fit_supervised(ClassifierHandle& handle, std::span<const Sample> train,
                    const TrainOptions& options, std::uint64_t seed, Fnv1a* stream) {
  require(options.epochs >= 0 && options.batch_size >= 1 && options.learning_rate > 0.0,
          ErrorKind::kConfig, "invalid training options");
  if (options.epochs == 0 || train.empty()) return;
  for (const Sample& s : train)
    require(s.label >= 0 && s.label < handle.label_count(), ErrorKind::kData,
            "label " + std::to_string(s.label) + " out of range in sample " + std::to_string(s.id));
  const Matrix x = handle.normalize(feature_matrix(train));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  const std::size_t bs = static_cast<std::size_t>(options.batch_size);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      Matrix batch(end - start, x.cols());
      std::vector<int> labels(end - start);
      for (std::size_t q = start; q < end; ++q) {
        auto src = x.row(order[q]);
        std::copy(src.begin(), src.end(), batch.row(q - start).begin());
        labels[q - start] = train[order[q]].label;
        if (stream != nullptr) stream->update_u64(train[order[q]].id);
      }
      const double loss = sgd_step(
          handle.network(), batch,
          [&](const Matrix& z, Matrix& g) { return cross_entropy(z, labels, g); },
          options.learning_rate);
      require(std::isfinite(loss), ErrorKind::kNumerical,
              "training loss diverged at epoch " + std::to_string(epoch));
      epoch_loss += loss * static_cast<double>(end - start);
    }
    handle.loss_curve.push_back(epoch_loss / static_cast<double>(order.size()));
  }
}

ClassifierHandle train_supervised(std::span<const Sample> train, int label_count,
                                  const ArchSpec& arch, const TrainOptions& options,
                                  std::uint64_t seed, Fnv1a* stream) {
  require(!train.empty(), ErrorKind::kData, "training set is empty");
  require(label_count >= 1, ErrorKind::kConfig, "label_count must be positive");
  const Normalization norm =
      Normalization::fit(feature_matrix(train), arch.input_spread, arch.lo, arch.hi);
  ClassifierHandle handle = make_classifier(arch, norm, label_count, seed);
  fit_supervised(handle, train, options, splitmix64(seed), stream);
  return handle;
}

ClassifierHandle clone_model(const ClassifierHandle& handle) { return handle; }

double accuracy(const ClassifierHandle& handle, std::span<const Sample> samples) {
  if (samples.empty()) return 0.0;
  const std::vector<int> pred = handle.predict(feature_matrix(samples));
  std::size_t hits = 0;
  for (std::size_t n = 0; n < samples.size(); ++n) hits += pred[n] == samples[n].label;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

void save_classifier(const std::filesystem::path& dir, const std::string& stem,
                     const ClassifierHandle& handle) {
  save_network(dir / (stem + ".kcmn"), handle.network());
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["kind"] = std::string(to_string(handle.kind()));
  j["label_count"] = handle.label_count();
  j["clamp"] = {handle.normalization().lo, handle.normalization().hi};
  j["mean"] = handle.normalization().mean;
  j["scale"] = handle.normalization().scale;
  write_file(dir / (stem + ".meta.json"), j.dump(2) + "\n");
}

ClassifierHandle load_classifier(const std::filesystem::path& dir, const std::string& stem) {
  AnyNetwork net = load_network(dir / (stem + ".kcmn"));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(dir / (stem + ".meta.json")));
    Normalization norm;
    norm.lo = j.at("clamp").at(0).get<double>();
    norm.hi = j.at("clamp").at(1).get<double>();
    norm.mean = j.at("mean").get<std::vector<double>>();
    norm.scale = j.at("scale").get<std::vector<double>>();
    const ModelKind kind = parse_model_kind(j.at("kind").get<std::string>());
    ClassifierHandle h(std::move(net), j.at("label_count").get<int>(), std::move(norm));
    require(h.kind() == kind, ErrorKind::kData, "model sidecar kind does not match model file");
    return h;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kData, "malformed model sidecar for " + stem + ": " + e.what());
  }
}

}  // namespace kcm
