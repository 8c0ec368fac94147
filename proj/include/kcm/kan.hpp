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

#ifndef KCM_KAN_HPP_
#define KCM_KAN_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "kcm/common.hpp"
#include "kcm/spline.hpp"

namespace kcm {

// Per-layer parameter gradients, laid out exactly like the layer's parameter
// block. Shared by KanNetwork and MlpNetwork.
using Gradients = std::vector<std::vector<double>>;

// Activations recorded by a training forward pass; consumed by backward().
struct ForwardCache {
  std::vector<Matrix> inputs;       // input to each layer
  std::vector<Matrix> preactivations;  // MLP only: affine output of each layer
  bool valid() const noexcept { return !inputs.empty(); }
  void clear() {
    inputs.clear();
    preactivations.clear();
  }
};

// A dense layer of in_dim x out_dim learnable edges sharing one spline basis.
// Node j of the output sums the activations of its incoming edges.
//
// Parameter block layout, with lanes of length out_dim contiguous so the
// inner loops run over output nodes:
//   coefficients  [in][basis][out]
//   base_scale    [in][out]
//   spline_scale  [in][out]
class KanLayer {
 public:
  KanLayer(int in_dim, int out_dim, SplineBasis basis);

  int in_dim() const noexcept { return in_dim_; }
  int out_dim() const noexcept { return out_dim_; }
  const SplineBasis& basis() const noexcept { return basis_; }

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  KanEdge edge(int i, int j) const;
  void set_edge(int i, int j, const KanEdge& edge);

  std::span<const double> coefficient_lane(int i, int m) const;
  std::span<const double> base_lane(int i) const;
  std::span<const double> spline_lane(int i) const;

  std::size_t coefficient_offset(int i, int m) const noexcept;
  std::size_t base_offset(int i) const noexcept;
  std::size_t spline_offset(int i) const noexcept;

  void forward(const Matrix& in, Matrix& out) const;
  // Accumulates parameter gradients into grad (same layout as parameters())
  // and, when grad_in is non-null, writes d loss / d input.
  void backward(const Matrix& in, const Matrix& grad_out, std::span<double> grad,
                Matrix* grad_in) const;

  friend bool operator==(const KanLayer&, const KanLayer&) = default;

 private:
  int in_dim_;
  int out_dim_;
  SplineBasis basis_;
  std::vector<double> params_;
};

struct KanShape {
  std::vector<int> dims;  // node counts, input first
  int order = 3;
  int intervals = 5;
  double lo = -1.0;
  double hi = 1.0;
};

class KanNetwork {
 public:
  explicit KanNetwork(std::vector<KanLayer> layers);

  // Coefficients ~ N(0, 0.1^2), base_scale = spline_scale = 1.
  static KanNetwork create(const KanShape& shape, std::uint64_t seed);

  const std::vector<KanLayer>& layers() const noexcept { return layers_; }
  std::vector<KanLayer>& layers() noexcept { return layers_; }
  int in_dim() const { return layers_.front().in_dim(); }
  int out_dim() const { return layers_.back().out_dim(); }
  KanShape shape() const;

  std::size_t parameter_count() const;
  std::vector<std::span<double>> parameter_blocks();
  Gradients zero_gradients() const;

  Matrix forward(const Matrix& batch) const;
  Matrix forward(const Matrix& batch, ForwardCache& cache) const;
  std::vector<double> forward(std::span<const double> sample) const;
  // Adds gradients of sum_n <upstream[n], logits[n]> to grads.
  void backward(const ForwardCache& cache, const Matrix& upstream, Gradients& grads) const;

  friend bool operator==(const KanNetwork&, const KanNetwork&) = default;

 private:
  std::vector<KanLayer> layers_;
};

}  // namespace kcm

#endif  // KCM_KAN_HPP_
