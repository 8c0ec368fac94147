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

#include "kcm/spline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kcm/common.hpp"

namespace kcm {

SplineBasis::SplineBasis(int order, int intervals, double lo, double hi)
    : order_(order), intervals_(intervals), lo_(lo), hi_(hi) {
  require(order >= 1 && order <= kMaxOrder, ErrorKind::kInvalidArgument,
          "spline order must be in [1, " + std::to_string(kMaxOrder) + "]");
  require(intervals >= 1, ErrorKind::kInvalidArgument, "spline needs at least one interval");
  require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, ErrorKind::kInvalidArgument,
          "spline range must satisfy lo < hi");
  step_ = (hi - lo) / intervals;
  knots_.resize(static_cast<std::size_t>(intervals + 2 * order + 1));
  for (int i = 0; i < static_cast<int>(knots_.size()); ++i)
    knots_[i] = lo + (i - order) * step_;
  knots_[order] = lo;
  knots_[order + intervals] = hi;
}

double SplineBasis::clamp(double x) const noexcept { return std::clamp(x, lo_, hi_); }

int SplineBasis::eval_local(double x, double* values, double* derivs) const {
  if (!std::isfinite(x)) fail(ErrorKind::kNumerical, "non-finite spline input");
  const bool outside = x < lo_ || x > hi_;
  const double xc = clamp(x);
  const int k = order_;

  int cell = static_cast<int>(std::floor((xc - lo_) / step_));
  cell = std::clamp(cell, 0, intervals_ - 1);
  // Guard against rounding in the division above.
  while (cell > 0 && xc < knots_[cell + k]) --cell;
  while (cell < intervals_ - 1 && xc >= knots_[cell + k + 1]) ++cell;
  const int span = cell + k;

  std::array<double, kMaxOrder + 1> left{};
  std::array<double, kMaxOrder + 1> right{};
  std::array<double, kMaxOrder + 1> lower{};
  values[0] = 1.0;
  for (int p = 1; p <= k; ++p) {
    if (p == k) std::copy(values, values + k, lower.begin());
    left[p] = xc - knots_[span + 1 - p];
    right[p] = knots_[span + p] - xc;
    double saved = 0.0;
    for (int r = 0; r < p; ++r) {
      const double temp = values[r] / (right[r + 1] + left[p - r]);
      values[r] = saved + right[r + 1] * temp;
      saved = left[p - r] * temp;
    }
    values[p] = saved;
  }

  if (derivs != nullptr) {
    for (int r = 0; r <= k; ++r) {
      if (outside) {
        derivs[r] = 0.0;
        continue;
      }
      const double a = r >= 1 ? lower[r - 1] : 0.0;
      const double b = r <= k - 1 ? lower[r] : 0.0;
      derivs[r] = (a - b) / step_;
    }
  }
  return cell;
}

std::vector<double> SplineBasis::eval(double x) const {
  require(std::isfinite(x), ErrorKind::kInvalidArgument, "basis input must be finite");
  std::vector<double> out(static_cast<std::size_t>(size()), 0.0);
  std::array<double, kMaxOrder + 1> local{};
  const int first = eval_local(x, local.data());
  for (int r = 0; r <= order_; ++r) out[first + r] = local[r];
  return out;
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

double edge_forward(const KanEdge& edge, const SplineBasis& basis, double x) {
  require(std::isfinite(x), ErrorKind::kInvalidArgument, "edge input must be finite");
  require(edge.coefficients.size() == static_cast<std::size_t>(basis.size()),
          ErrorKind::kInvalidArgument, "edge coefficients do not match basis size");
  std::array<double, SplineBasis::kMaxOrder + 1> local{};
  const int first = basis.eval_local(x, local.data());
  double spline = 0.0;
  for (int r = 0; r <= basis.order(); ++r) spline += edge.coefficients[first + r] * local[r];
  return edge.base_scale * silu(x) + edge.spline_scale * spline;
}

}  // namespace kcm
