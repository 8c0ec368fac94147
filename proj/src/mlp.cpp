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

#include "kcm/mlp.hpp"

#include <cmath>
#include <random>
#include <string>

#include "kcm/simd.hpp"

namespace kcm {

DenseLayer::DenseLayer(int in_dim, int out_dim) : in_dim_(in_dim), out_dim_(out_dim) {
  require(in_dim >= 1 && out_dim >= 1, ErrorKind::kInvalidArgument,
          "dense layer dimensions must be positive");
  params_.assign(static_cast<std::size_t>(in_dim + 1) * out_dim, 0.0);
}

std::span<const double> DenseLayer::weight_lane(int i) const {
  return std::span<const double>(params_).subspan(static_cast<std::size_t>(i) * out_dim_, out_dim_);
}

std::span<const double> DenseLayer::bias() const {
  return std::span<const double>(params_).subspan(static_cast<std::size_t>(in_dim_) * out_dim_,
                                                  out_dim_);
}

void DenseLayer::forward(const Matrix& in, Matrix& out) const {
  require(in.cols() == static_cast<std::size_t>(in_dim_), ErrorKind::kInvalidArgument,
          "dense layer expects " + std::to_string(in_dim_) + " inputs, got " +
              std::to_string(in.cols()));
  out = Matrix(in.rows(), out_dim_);
  for (std::size_t n = 0; n < in.rows(); ++n) {
    std::span<double> row = out.row(n);
    std::copy(bias().begin(), bias().end(), row.begin());
    for (int i = 0; i < in_dim_; ++i) simd::axpy(in(n, i), weight_lane(i), row);
  }
}

void DenseLayer::backward(const Matrix& in, const Matrix& grad_out, std::span<double> grad,
                          Matrix* grad_in) const {
  require(grad.size() == params_.size(), ErrorKind::kInvalidArgument,
          "gradient block does not match dense layer parameters");
  if (grad_in != nullptr) *grad_in = Matrix(in.rows(), in_dim_);
  const std::size_t bias_offset = static_cast<std::size_t>(in_dim_) * out_dim_;
  for (std::size_t n = 0; n < in.rows(); ++n) {
    std::span<const double> g = grad_out.row(n);
    for (int i = 0; i < in_dim_; ++i) {
      simd::axpy(in(n, i), g, grad.subspan(static_cast<std::size_t>(i) * out_dim_, out_dim_));
      if (grad_in != nullptr) (*grad_in)(n, i) = simd::dot(weight_lane(i), g);
    }
    simd::axpy(1.0, g, grad.subspan(bias_offset, out_dim_));
  }
}

MlpNetwork::MlpNetwork(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  require(!layers_.empty(), ErrorKind::kInvalidArgument, "MLP needs at least one layer");
  for (std::size_t l = 1; l < layers_.size(); ++l)
    require(layers_[l - 1].out_dim() == layers_[l].in_dim(), ErrorKind::kInvalidArgument,
            "MLP layer " + std::to_string(l) + " input does not match previous output");
}

MlpNetwork MlpNetwork::create(const std::vector<int>& dims, std::uint64_t seed) {
  require(dims.size() >= 2, ErrorKind::kInvalidArgument, "MLP needs input and output widths");
  std::mt19937_64 rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer(dims[l], dims[l + 1]);
    std::normal_distribution<double> w(0.0, std::sqrt(2.0 / dims[l]));
    std::span<double> p = layer.parameters();
    const std::size_t weights = static_cast<std::size_t>(dims[l]) * dims[l + 1];
    for (std::size_t q = 0; q < weights; ++q) p[q] = w(rng);
    layers.push_back(std::move(layer));
  }
  return MlpNetwork(std::move(layers));
}

std::vector<int> MlpNetwork::dims() const {
  std::vector<int> d{in_dim()};
  for (const DenseLayer& l : layers_) d.push_back(l.out_dim());
  return d;
}

std::size_t MlpNetwork::parameter_count() const {
  std::size_t total = 0;
  for (const DenseLayer& l : layers_) total += l.parameter_count();
  return total;
}

std::vector<std::span<double>> MlpNetwork::parameter_blocks() {
  std::vector<std::span<double>> blocks;
  for (DenseLayer& l : layers_) blocks.push_back(l.parameters());
  return blocks;
}

Gradients MlpNetwork::zero_gradients() const {
  Gradients g;
  for (const DenseLayer& l : layers_) g.emplace_back(l.parameter_count(), 0.0);
  return g;
}

namespace {

void ApplySilu(const Matrix& pre, Matrix& post) {
  post = Matrix(pre.rows(), pre.cols());
  std::span<const double> src = pre.data();
  std::span<double> dst = post.data();
  for (std::size_t q = 0; q < src.size(); ++q) dst[q] = silu(src[q]);
}

}  // namespace

Matrix MlpNetwork::forward(const Matrix& batch) const {
  Matrix current = batch;
  Matrix pre;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].forward(current, pre);
    if (l + 1 < layers_.size()) {
      ApplySilu(pre, current);
    } else {
      current = std::move(pre);
    }
  }
  return current;
}

Matrix MlpNetwork::forward(const Matrix& batch, ForwardCache& cache) const {
  cache.clear();
  Matrix current = batch;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix pre;
    layers_[l].forward(current, pre);
    cache.inputs.push_back(std::move(current));
    if (l + 1 < layers_.size()) {
      ApplySilu(pre, current);
      cache.preactivations.push_back(std::move(pre));
    } else {
      current = pre;
      cache.preactivations.push_back(std::move(pre));
    }
  }
  return current;
}

std::vector<double> MlpNetwork::forward(std::span<const double> sample) const {
  Matrix out = forward(Matrix::from_row(sample));
  return {out.data().begin(), out.data().end()};
}

void MlpNetwork::backward(const ForwardCache& cache, const Matrix& upstream,
                          Gradients& grads) const {
  require(cache.valid() && cache.inputs.size() == layers_.size() &&
              cache.preactivations.size() == layers_.size(),
          ErrorKind::kInvalidArgument, "backward called without a cached forward pass");
  require(grads.size() == layers_.size(), ErrorKind::kInvalidArgument,
          "gradient set does not match network depth");
  require(upstream.rows() == cache.inputs.front().rows() &&
              upstream.cols() == static_cast<std::size_t>(out_dim()),
          ErrorKind::kInvalidArgument, "upstream gradient shape mismatch");
  Matrix g = upstream;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    if (l + 1 < layers_.size()) {
      std::span<double> gd = g.data();
      std::span<const double> pre = cache.preactivations[l].data();
      for (std::size_t q = 0; q < gd.size(); ++q) gd[q] *= silu_grad(pre[q]);
    }
    Matrix g_in;
    layers_[l].backward(cache.inputs[l], g, grads[l], l > 0 ? &g_in : nullptr);
    g = std::move(g_in);
  }
}

std::size_t mlp_parameter_count(const std::vector<int>& dims) {
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l)
    total += static_cast<std::size_t>(dims[l] + 1) * dims[l + 1];
  return total;
}

std::size_t kan_parameter_count(const KanShape& shape) {
  std::size_t edges = 0;
  for (std::size_t l = 0; l + 1 < shape.dims.size(); ++l)
    edges += static_cast<std::size_t>(shape.dims[l]) * shape.dims[l + 1];
  return edges * static_cast<std::size_t>(shape.intervals + shape.order + 2);
}

std::vector<int> match_capacity_dims(const KanShape& kan) {
  const double target = static_cast<double>(kan_parameter_count(kan));
  const std::size_t hidden_layers = kan.dims.size() > 2 ? kan.dims.size() - 2 : 1;
  std::vector<int> best;
  double best_gap = 0.0;
  for (int width = 1;; ++width) {
    std::vector<int> dims{kan.dims.front()};
    dims.insert(dims.end(), hidden_layers, width);
    dims.push_back(kan.dims.back());
    const double count = static_cast<double>(mlp_parameter_count(dims));
    const double gap = std::abs(count - target);
    if (best.empty() || gap < best_gap) {
      best = dims;
      best_gap = gap;
    }
    if (count > target) break;
  }
  require(best_gap <= 0.1 * target, ErrorKind::kInvalidArgument,
          "no MLP width matches the KAN parameter count within 10%");
  return best;
}

MlpNetwork match_capacity(const KanNetwork& kan, std::uint64_t seed) {
  return MlpNetwork::create(match_capacity_dims(kan.shape()), seed);
}

}  // namespace kcm
