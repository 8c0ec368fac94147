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

#ifndef KCM_SPLINE_HPP_
#define KCM_SPLINE_HPP_

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace kcm {

// Uniform B-spline basis of degree `order` with `intervals` cells on [lo, hi].
//
// The knot vector holds intervals + 2*order + 1 entries: the uniform grid over
// [lo, hi] extended by `order` equally spaced knots on each side, so every
// basis function is a full (unclamped) B-spline and the basis forms a
// partition of unity on [lo, hi]. Inputs are clamped into [lo, hi]; the right
// endpoint is evaluated on the last closed cell.
class SplineBasis {
 public:
  static constexpr int kMaxOrder = 7;

  SplineBasis(int order, int intervals, double lo, double hi);

  int order() const noexcept { return order_; }
  int intervals() const noexcept { return intervals_; }
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  // Number of basis functions, intervals + order.
  int size() const noexcept { return intervals_ + order_; }
  std::span<const double> knots() const noexcept { return knots_; }

  double clamp(double x) const noexcept;

  // Evaluates the order+1 basis functions that may be nonzero at clamp(x).
  // Writes them to values[0..order] and returns the index of the first one.
  // If derivs is non-null it receives d/dx of the same functions (zero
  // outside [lo, hi], where the clamp is flat).
  int eval_local(double x, double* values, double* derivs = nullptr) const;

  // Dense basis vector of length size(). Rejects non-finite x.
  std::vector<double> eval(double x) const;

  friend bool operator==(const SplineBasis&, const SplineBasis&) = default;

 private:
  int order_;
  int intervals_;
  double lo_;
  double hi_;
  double step_;
  std::vector<double> knots_;
};

// Residual base activation x / (1 + exp(-x)).
double silu(double x);
double silu_grad(double x);

// One learnable edge activation.
struct KanEdge {
  std::vector<double> coefficients;
  double base_scale = 1.0;
  double spline_scale = 1.0;
};

// base_scale * silu(x) + spline_scale * sum_i c_i B_i(clamp(x)).
double edge_forward(const KanEdge& edge, const SplineBasis& basis, double x);

}  // namespace kcm

#endif  // KCM_SPLINE_HPP_
