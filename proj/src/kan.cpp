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

#include "kcm/kan.hpp"

#include <array>
#include <string>

#include "kcm/simd.hpp"

namespace kcm {

KanLayer::KanLayer(int in_dim, int out_dim, SplineBasis basis)
    : in_dim_(in_dim), out_dim_(out_dim), basis_(std::move(basis)) {
  require(in_dim >= 1 && out_dim >= 1, ErrorKind::kInvalidArgument,
          "KAN layer dimensions must be positive");
  const std::size_t edges = static_cast<std::size_t>(in_dim) * out_dim;
  params_.assign(edges * (basis_.size() + 2), 0.0);
  for (int i = 0; i < in_dim_; ++i) {
    for (int j = 0; j < out_dim_; ++j) {
      params_[base_offset(i) + j] = 1.0;
      params_[spline_offset(i) + j] = 1.0;
    }
  }
}

std::size_t KanLayer::coefficient_offset(int i, int m) const noexcept {
  return (static_cast<std::size_t>(i) * basis_.size() + m) * out_dim_;
}

std::size_t KanLayer::base_offset(int i) const noexcept {
  return static_cast<std::size_t>(in_dim_) * basis_.size() * out_dim_ +
         static_cast<std::size_t>(i) * out_dim_;
}

std::size_t KanLayer::spline_offset(int i) const noexcept {
  return static_cast<std::size_t>(in_dim_) * (basis_.size() + 1) * out_dim_ +
         static_cast<std::size_t>(i) * out_dim_;
}

std::span<const double> KanLayer::coefficient_lane(int i, int m) const {
  return std::span<const double>(params_).subspan(coefficient_offset(i, m), out_dim_);
}
std::span<const double> KanLayer::base_lane(int i) const {
  return std::span<const double>(params_).subspan(base_offset(i), out_dim_);
}
std::span<const double> KanLayer::spline_lane(int i) const {
  return std::span<const double>(params_).subspan(spline_offset(i), out_dim_);
}

KanEdge KanLayer::edge(int i, int j) const {
  KanEdge e;
  e.coefficients.resize(basis_.size());
  for (int m = 0; m < basis_.size(); ++m) e.coefficients[m] = params_[coefficient_offset(i, m) + j];
  e.base_scale = params_[base_offset(i) + j];
  e.spline_scale = params_[spline_offset(i) + j];
  return e;
}

void KanLayer::set_edge(int i, int j, const KanEdge& e) {
  require(e.coefficients.size() == static_cast<std::size_t>(basis_.size()),
          ErrorKind::kInvalidArgument, "edge coefficient count must equal basis size");
  for (int m = 0; m < basis_.size(); ++m) params_[coefficient_offset(i, m) + j] = e.coefficients[m];
  params_[base_offset(i) + j] = e.base_scale;
  params_[spline_offset(i) + j] = e.spline_scale;
}

void KanLayer::forward(const Matrix& in, Matrix& out) const {
  require(in.cols() == static_cast<std::size_t>(in_dim_), ErrorKind::kInvalidArgument,
          "KAN layer expects " + std::to_string(in_dim_) + " inputs, got " +
              std::to_string(in.cols()));
  out = Matrix(in.rows(), out_dim_);
  std::vector<double> spline_sum(out_dim_);
  std::array<double, SplineBasis::kMaxOrder + 1> local{};
  const int k = basis_.order();
  for (std::size_t n = 0; n < in.rows(); ++n) {
    std::span<double> row = out.row(n);
    for (int i = 0; i < in_dim_; ++i) {
      const double x = in(n, i);
      const int first = basis_.eval_local(x, local.data());
      std::fill(spline_sum.begin(), spline_sum.end(), 0.0);
      for (int r = 0; r <= k; ++r) simd::axpy(local[r], coefficient_lane(i, first + r), spline_sum);
      simd::axpy(silu(x), base_lane(i), row);
      simd::mul_acc(spline_lane(i), spline_sum, row);
    }
  }
}

void KanLayer::backward(const Matrix& in, const Matrix& grad_out, std::span<double> grad,
                        Matrix* grad_in) const {
  require(grad.size() == params_.size(), ErrorKind::kInvalidArgument,
          "gradient block does not match KAN layer parameters");
  if (grad_in != nullptr) *grad_in = Matrix(in.rows(), in_dim_);
  std::vector<double> spline_sum(out_dim_);
  std::vector<double> scaled(out_dim_);
  std::array<double, SplineBasis::kMaxOrder + 1> local{};
  std::array<double, SplineBasis::kMaxOrder + 1> dlocal{};
  const int k = basis_.order();
  for (std::size_t n = 0; n < in.rows(); ++n) {
    std::span<const double> g = grad_out.row(n);
    for (int i = 0; i < in_dim_; ++i) {
      const double x = in(n, i);
      const int first = basis_.eval_local(x, local.data(), dlocal.data());
      std::fill(spline_sum.begin(), spline_sum.end(), 0.0);
      for (int r = 0; r <= k; ++r) simd::axpy(local[r], coefficient_lane(i, first + r), spline_sum);

      simd::axpy(silu(x), g, grad.subspan(base_offset(i), out_dim_));
      simd::mul_acc(spline_sum, g, grad.subspan(spline_offset(i), out_dim_));
      simd::mul(spline_lane(i), g, scaled);
      for (int r = 0; r <= k; ++r)
        simd::axpy(local[r], scaled, grad.subspan(coefficient_offset(i, first + r), out_dim_));

      if (grad_in != nullptr) {
        double dx = silu_grad(x) * simd::dot(base_lane(i), g);
        for (int r = 0; r <= k; ++r)
          if (dlocal[r] != 0.0) dx += dlocal[r] * simd::dot(coefficient_lane(i, first + r), scaled);
        (*grad_in)(n, i) = dx;
      }
    }
  }
}

KanNetwork::KanNetwork(std::vector<KanLayer> layers) : layers_(std::move(layers)) {
  require(!layers_.empty(), ErrorKind::kInvalidArgument, "KAN needs at least one layer");
  for (std::size_t l = 1; l < layers_.size(); ++l)
    require(layers_[l - 1].out_dim() == layers_[l].in_dim(), ErrorKind::kInvalidArgument,
            "KAN layer " + std::to_string(l) + " input does not match previous output");
}

KanNetwork KanNetwork::create(const KanShape& shape, std::uint64_t seed) {
  require(shape.dims.size() >= 2, ErrorKind::kInvalidArgument,
          "KAN shape needs input and output widths");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<KanLayer> layers;
  for (std::size_t l = 0; l + 1 < shape.dims.size(); ++l) {
    KanLayer layer(shape.dims[l], shape.dims[l + 1],
                   SplineBasis(shape.order, shape.intervals, shape.lo, shape.hi));
    std::span<double> p = layer.parameters();
    const std::size_t coef_end = layer.base_offset(0);
    for (std::size_t q = 0; q < coef_end; ++q) p[q] = noise(rng);
    layers.push_back(std::move(layer));
  }
  return KanNetwork(std::move(layers));
}

KanShape KanNetwork::shape() const {
  KanShape s;
  const SplineBasis& b = layers_.front().basis();
  s.order = b.order();
  s.intervals = b.intervals();
  s.lo = b.lo();
  s.hi = b.hi();
  s.dims.push_back(in_dim());
  for (const KanLayer& l : layers_) s.dims.push_back(l.out_dim());
  return s;
}

std::size_t KanNetwork::parameter_count() const {
  std::size_t total = 0;
  for (const KanLayer& l : layers_) total += l.parameter_count();
  return total;
}

std::vector<std::span<double>> KanNetwork::parameter_blocks() {
  std::vector<std::span<double>> blocks;
  for (KanLayer& l : layers_) blocks.push_back(l.parameters());
  return blocks;
}

Gradients KanNetwork::zero_gradients() const {
  Gradients g;
  for (const KanLayer& l : layers_) g.emplace_back(l.parameter_count(), 0.0);
  return g;
}

Matrix KanNetwork::forward(const Matrix& batch) const {
  Matrix current = batch;
  Matrix next;
  for (const KanLayer& l : layers_) {
    l.forward(current, next);
    std::swap(current, next);
  }
  return current;
}

Matrix KanNetwork::forward(const Matrix& batch, ForwardCache& cache) const {
  cache.clear();
  Matrix current = batch;
  for (const KanLayer& l : layers_) {
    Matrix next;
    l.forward(current, next);
    cache.inputs.push_back(std::move(current));
    current = std::move(next);
  }
  return current;
}

std::vector<double> KanNetwork::forward(std::span<const double> sample) const {
  Matrix out = forward(Matrix::from_row(sample));
  return {out.data().begin(), out.data().end()};
}

void KanNetwork::backward(const ForwardCache& cache, const Matrix& upstream,
                          Gradients& grads) const {
  require(cache.valid() && cache.inputs.size() == layers_.size(), ErrorKind::kInvalidArgument,
          "backward called without a cached forward pass");
  require(grads.size() == layers_.size(), ErrorKind::kInvalidArgument,
          "gradient set does not match network depth");
  require(upstream.rows() == cache.inputs.front().rows() &&
              upstream.cols() == static_cast<std::size_t>(out_dim()),
          ErrorKind::kInvalidArgument, "upstream gradient shape mismatch");
  Matrix g = upstream;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    Matrix g_in;
    layers_[l].backward(cache.inputs[l], g, grads[l], l > 0 ? &g_in : nullptr);
    g = std::move(g_in);
  }
}

}  // namespace kcm
