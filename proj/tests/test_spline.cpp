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
#include <random>
#include <vector>

#include "doctest.h"
#include "kcm/common.hpp"
#include "kcm/spline.hpp"

namespace kcm {
namespace {

// Textbook Cox-de Boor recursion on an explicitly built extended knot
// vector, one basis function at a time, with half-open cells.
double NaiveBasis(const std::vector<double>& t, int i, int p, double x) {
  if (p == 0) return (t[i] <= x && x < t[i + 1]) ? 1.0 : 0.0;
  double left = 0.0;
  double right = 0.0;
  if (t[i + p] != t[i]) left = (x - t[i]) / (t[i + p] - t[i]) * NaiveBasis(t, i, p - 1, x);
  if (t[i + p + 1] != t[i + 1])
    right = (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]) * NaiveBasis(t, i + 1, p - 1, x);
  return left + right;
}

std::vector<double> NaiveKnots(int k, int g, double lo, double hi) {
  std::vector<double> t;
  const double h = (hi - lo) / g;
  for (int i = 0; i <= g + 2 * k; ++i) t.push_back(lo + (i - k) * h);
  return t;
}

std::vector<double> NaiveEval(int k, int g, double lo, double hi, double x) {
  const auto t = NaiveKnots(k, g, lo, hi);
  std::vector<double> out(g + k);
  for (int i = 0; i < g + k; ++i) out[i] = NaiveBasis(t, i, k, x);
  return out;
}

TEST_SUITE("spline") {

TEST_CASE("basis matches the naive recursion at x = 0.37 for k=3, G=5 on [-1, 1]") {
  const SplineBasis basis(3, 5, -1.0, 1.0);
  const auto got = basis.eval(0.37);
  const auto want = NaiveEval(3, 5, -1.0, 1.0, 0.37);
  REQUIRE(got.size() == 8);
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-13));
}

TEST_CASE("basis matches the naive recursion across orders, grids and points") {
  std::mt19937_64 rng(5);
  for (int k = 1; k <= 5; ++k)
    for (int g : {1, 2, 5, 9}) {
      const SplineBasis basis(k, g, -2.0, 3.0);
      std::uniform_real_distribution<double> u(-2.0, 3.0);
      for (int n = 0; n < 50; ++n) {
        const double x = u(rng);
        const auto got = basis.eval(x);
        const auto want = NaiveEval(k, g, -2.0, 3.0, x);
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) < 1e-12);
      }
    }
}

TEST_CASE("knot vector has G + 2k + 1 uniform entries") {
  const SplineBasis basis(3, 5, -1.0, 1.0);
  const auto want = NaiveKnots(3, 5, -1.0, 1.0);
  REQUIRE(basis.knots().size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(basis.knots()[i] == doctest::Approx(want[i]));
  CHECK(basis.size() == 8);
}

TEST_CASE("partition of unity and nonnegativity on random bases and points") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> order(1, 5);
  std::uniform_int_distribution<int> grid(1, 20);
  for (int n = 0; n < 1000; ++n) {
    const double lo = std::uniform_real_distribution<double>(-5.0, 0.0)(rng);
    const double hi = lo + std::uniform_real_distribution<double>(0.1, 6.0)(rng);
    const SplineBasis basis(order(rng), grid(rng), lo, hi);
    const double x = std::uniform_real_distribution<double>(lo, hi)(rng);
    const auto b = basis.eval(x);
    double sum = 0.0;
    for (double v : b) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("at most k+1 nonzero entries strictly inside the grid") {
  std::mt19937_64 rng(3);
  for (int k = 1; k <= 4; ++k) {
    const SplineBasis basis(k, 7, -1.0, 1.0);
    for (int n = 0; n < 200; ++n) {
      const double x = std::uniform_real_distribution<double>(-0.999, 0.999)(rng);
      const auto b = basis.eval(x);
      int nonzero = 0;
      for (double v : b) nonzero += v != 0.0;
      CHECK(nonzero <= k + 1);
    }
  }
}

TEST_CASE("inputs outside the range are clamped, including the right endpoint") {
  const SplineBasis basis(3, 5, -1.0, 1.0);
  CHECK(basis.eval(7.0) == basis.eval(1.0));
  CHECK(basis.eval(-3.0) == basis.eval(-1.0));
  const auto at_hi = basis.eval(1.0);
  double sum = 0.0;
  for (double v : at_hi) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  // Continuity at the right endpoint: the closed last cell agrees with the limit.
  const auto near_hi = basis.eval(1.0 - 1e-12);
  for (std::size_t i = 0; i < at_hi.size(); ++i) CHECK(std::abs(at_hi[i] - near_hi[i]) < 1e-9);
}

TEST_CASE("derivatives match central differences inside the grid and vanish outside") {
  const SplineBasis basis(3, 6, -1.0, 1.0);
  double values[SplineBasis::kMaxOrder + 1];
  double derivs[SplineBasis::kMaxOrder + 1];
  for (double x : {-0.93, -0.41, 0.0, 0.123, 0.77}) {
    const int first = basis.eval_local(x, values, derivs);
    const double h = 1e-6;
    const auto up = basis.eval(x + h);
    const auto down = basis.eval(x - h);
    for (int r = 0; r <= 3; ++r)
      CHECK(derivs[r] == doctest::Approx((up[first + r] - down[first + r]) / (2 * h)).epsilon(1e-6));
  }
  basis.eval_local(1.5, values, derivs);
  for (int r = 0; r <= 3; ++r) CHECK(derivs[r] == 0.0);
}

TEST_CASE("non-finite inputs and invalid shapes are rejected") {
  const SplineBasis basis(3, 5, -1.0, 1.0);
  CHECK_THROWS_AS(basis.eval(std::nan("")), Error);
  CHECK_THROWS_AS(basis.eval(INFINITY), Error);
  CHECK_THROWS_AS(SplineBasis(0, 5, -1.0, 1.0), Error);
  CHECK_THROWS_AS(SplineBasis(3, 0, -1.0, 1.0), Error);
  CHECK_THROWS_AS(SplineBasis(3, 5, 1.0, -1.0), Error);
  CHECK_THROWS_AS(SplineBasis(SplineBasis::kMaxOrder + 1, 5, -1.0, 1.0), Error);
}

TEST_CASE("edge activation equals base SiLU plus the weighted basis sum") {
  const SplineBasis basis(3, 5, -1.0, 1.0);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> d(0.0, 0.3);
  KanEdge edge;
  for (int i = 0; i < basis.size(); ++i) edge.coefficients.push_back(d(rng));
  edge.base_scale = 0.7;
  edge.spline_scale = -1.3;
  const double x = 0.5;
  const auto b = NaiveEval(3, 5, -1.0, 1.0, x);
  double spline = 0.0;
  for (int i = 0; i < basis.size(); ++i) spline += edge.coefficients[i] * b[i];
  const double want = 0.7 * (x / (1.0 + std::exp(-x))) - 1.3 * spline;
  CHECK(edge_forward(edge, basis, x) == doctest::Approx(want).epsilon(1e-13));
}

TEST_CASE("SiLU gradient matches a central difference") {
  for (double x : {-4.0, -0.5, 0.0, 0.3, 2.5}) {
    const double h = 1e-6;
    CHECK(silu_grad(x) == doctest::Approx((silu(x + h) - silu(x - h)) / (2 * h)).epsilon(1e-7));
  }
}

}  // TEST_SUITE

}  // namespace
}  // namespace kcm
