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

#include <atomic>
#include <cstdlib>
#include <string>

#include "kcm/common.hpp"
#include "kcm/simd.hpp"

namespace kcm::simd {
namespace {

const KernelTable* TableFor(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return &scalar::table();
    case Isa::kAvx2:
#if defined(__x86_64__) || defined(_M_X64)
      return &avx2::table();
#else
      return nullptr;
#endif
    case Isa::kNeon:
#if defined(__aarch64__)
      return &neon::table();
#else
      return nullptr;
#endif
  }
  return nullptr;
}

Isa BestIsa() {
  if (const char* env = std::getenv("KCM_SIMD")) {
    std::string v(env);
    if (v == "scalar") return Isa::kScalar;
    if (v == "avx2" && isa_supported(Isa::kAvx2)) return Isa::kAvx2;
    if (v == "neon" && isa_supported(Isa::kNeon)) return Isa::kNeon;
  }
  if (isa_supported(Isa::kAvx2)) return Isa::kAvx2;
  if (isa_supported(Isa::kNeon)) return Isa::kNeon;
  return Isa::kScalar;
}

struct State {
  std::atomic<Isa> isa;
  std::atomic<const KernelTable*> table;
  State() {
    Isa best = BestIsa();
    isa.store(best);
    table.store(TableFor(best));
  }
};

State& GetState() {
  static State state;
  return state;
}

}  // namespace

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::kNeon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() { return GetState().isa.load(); }

void force_isa(Isa isa) {
  require(isa_supported(isa), ErrorKind::kInvalidArgument,
          "SIMD variant not available: " + std::string(isa_name(isa)));
  State& s = GetState();
  s.isa.store(isa);
  s.table.store(TableFor(isa));
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
    case Isa::kNeon:
      return "neon";
  }
  return "unknown";
}

const KernelTable& kernels() { return *GetState().table.load(std::memory_order_relaxed); }

}  // namespace kcm::simd
