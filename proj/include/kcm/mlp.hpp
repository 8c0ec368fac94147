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

#ifndef KCM_MLP_HPP_
#define KCM_MLP_HPP_

#include <cstdint>
#include <vector>

#include "kcm/kan.hpp"

namespace kcm {

// Fully connected layer; parameter block is W [in][out] followed by b [out].
class DenseLayer {
 public:
  DenseLayer(int in_dim, int out_dim);

  int in_dim() const noexcept { return in_dim_; }
  int out_dim() const noexcept { return out_dim_; }
  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  std::span<const double> weight_lane(int i) const;
  std::span<const double> bias() const;

  void forward(const Matrix& in, Matrix& out) const;
  void backward(const Matrix& in, const Matrix& grad_out, std::span<double> grad,
                Matrix* grad_in) const;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;

 private:
  int in_dim_;
  int out_dim_;
  std::vector<double> params_;
};

// MLP with SiLU at every hidden node and linear output logits.
class MlpNetwork {
 public:
  explicit MlpNetwork(std::vector<DenseLayer> layers);

  // He-style normal initialization, zero biases.
  static MlpNetwork create(const std::vector<int>& dims, std::uint64_t seed);

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  int in_dim() const { return layers_.front().in_dim(); }
  int out_dim() const { return layers_.back().out_dim(); }
  std::vector<int> dims() const;

  std::size_t parameter_count() const;
  std::vector<std::span<double>> parameter_blocks();
  Gradients zero_gradients() const;

  Matrix forward(const Matrix& batch) const;
  Matrix forward(const Matrix& batch, ForwardCache& cache) const;
  std::vector<double> forward(std::span<const double> sample) const;
  void backward(const ForwardCache& cache, const Matrix& upstream, Gradients& grads) const;

  friend bool operator==(const MlpNetwork&, const MlpNetwork&) = default;

 private:
  std::vector<DenseLayer> layers_;
};

// Parameter count of an MLP with the given widths.
std::size_t mlp_parameter_count(const std::vector<int>& dims);
// Parameter count of a KAN of the given shape: edges * (G + k + 2).
std::size_t kan_parameter_count(const KanShape& shape);

// MLP widths with the KAN's depth (at least one hidden layer) and a uniform
// hidden width chosen to bring the parameter count closest to the KAN's.
// Fails with kInvalidArgument if no width lands within +-10%.
std::vector<int> match_capacity_dims(const KanShape& kan);
MlpNetwork match_capacity(const KanNetwork& kan, std::uint64_t seed);

}  // namespace kcm

#endif  // KCM_MLP_HPP_
