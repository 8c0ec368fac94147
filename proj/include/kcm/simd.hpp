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

#ifndef KCM_SIMD_HPP_
#define KCM_SIMD_HPP_

// Vector kernels behind the KAN and MLP inner loops.
//
// Every kernel has a scalar reference implementation plus optional AVX2 (x86)
// and NEON (aarch64) variants. The variant is chosen once at startup from the
// CPU feature set and may be overridden with KCM_SIMD=scalar|avx2|neon or
// force_isa(). Vector variants reassociate sums and use fused multiply-add, so
// they agree with the scalar reference to rounding, not bit-for-bit.

#include <cstddef>
#include <span>
#include <string_view>

namespace kcm::simd {

enum class Isa { kScalar, kAvx2, kNeon };

struct KernelTable {
  // sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // z[i] += x[i] * y[i]
  void (*mul_acc)(const double* x, const double* y, double* z, std::size_t n);
  // z[i] = x[i] * y[i]
  void (*mul)(const double* x, const double* y, double* z, std::size_t n);
};

namespace scalar {
const KernelTable& table();
}
#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
const KernelTable& table();
}
#endif
#if defined(__aarch64__)
namespace neon {
const KernelTable& table();
}
#endif

bool isa_supported(Isa isa);
Isa active_isa();
// Throws kcm::Error if the ISA is not supported on this CPU/build.
void force_isa(Isa isa);
std::string_view isa_name(Isa isa);
const KernelTable& kernels();

inline double dot(std::span<const double> x, std::span<const double> y) {
  return kernels().dot(x.data(), y.data(), x.size());
}
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  kernels().axpy(a, x.data(), y.data(), x.size());
}
inline void mul_acc(std::span<const double> x, std::span<const double> y,
                    std::span<double> z) {
  kernels().mul_acc(x.data(), y.data(), z.data(), x.size());
}
inline void mul(std::span<const double> x, std::span<const double> y,
                std::span<double> z) {
  kernels().mul(x.data(), y.data(), z.data(), x.size());
}

}  // namespace kcm::simd

#endif  // KCM_SIMD_HPP_
