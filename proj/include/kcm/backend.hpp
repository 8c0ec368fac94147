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

#ifndef KCM_BACKEND_HPP_
#define KCM_BACKEND_HPP_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include "kcm/dataset.hpp"
#include "kcm/prompt.hpp"

namespace kcm {

// Teacher prediction from any large-model backend.
struct LargeModelResponse {
  std::vector<double> distribution;
  double confidence = 0.0;  // max entry of distribution
  std::chrono::nanoseconds latency{0};
  double cost_units = 0.0;
  std::string model_name;
};

enum class BackendFailure {
  kTimeout,
  kMalformedResponse,
  kHttpStatus,
  kTransport,
  kInvalidRequest,
};

std::string_view to_string(BackendFailure f);

class BackendError : public Error {
 public:
  BackendError(BackendFailure failure, const std::string& what, int attempts = 1)
      : Error(ErrorKind::kBackend, what), failure_(failure), attempts_(attempts) {}
  BackendFailure failure() const noexcept { return failure_; }
  int attempts() const noexcept { return attempts_; }

 private:
  BackendFailure failure_;
  int attempts_;
};

// Checks length, nonnegativity, sum to 1 +- 1e-9, and sets confidence to the
// max entry. Throws BackendError(kMalformedResponse) otherwise.
void validate_response(LargeModelResponse& response, int label_count);

// The large model F_l. Implementations must be callable concurrently.
class LargeModelBackend {
 public:
  virtual ~LargeModelBackend() = default;
  virtual LargeModelResponse predict(const Sample& sample, const PromptAugmentation& prompt) = 0;
  virtual std::string name() const = 0;
};

struct ConfidenceRange {
  double lo = 0.0;
  double hi = 1.0;
};

// Deterministic stand-in for a large model: correct with the accuracy of the
// sample's region, decided by a hash of (seed, sample id).
struct OracleSpec {
  int label_count = 0;
  double head_accuracy = 0.60;
  double med_accuracy = 0.57;
  double tail_accuracy = 0.57;
  ConfidenceRange when_correct{0.97, 0.999};
  ConfidenceRange when_wrong{0.40, 0.95};
  double cost_per_call = 1.0;
  std::uint64_t seed = 0;
};

void validate(const OracleSpec& spec);
LargeModelResponse oracle_predict(const OracleSpec& spec, const Sample& sample);

class OracleBackend final : public LargeModelBackend {
 public:
  explicit OracleBackend(OracleSpec spec);
  LargeModelResponse predict(const Sample& sample, const PromptAugmentation& prompt) override;
  std::string name() const override { return "oracle"; }
  const OracleSpec& spec() const noexcept { return spec_; }

 private:
  OracleSpec spec_;
};

// Decorator that counts calls, sums cost, and records which sample ids and
// prompts reached the wrapped backend.
class CountingBackend final : public LargeModelBackend {
 public:
  explicit CountingBackend(LargeModelBackend& inner) : inner_(inner) {}
  LargeModelResponse predict(const Sample& sample, const PromptAugmentation& prompt) override;
  std::string name() const override { return inner_.name(); }

  std::size_t calls() const;
  std::size_t failures() const;
  double cost_units() const;
  std::vector<std::uint64_t> sample_ids() const;
  std::vector<std::string> prompts() const;
  void reset();

 private:
  LargeModelBackend& inner_;
  mutable std::mutex mu_;
  std::size_t calls_ = 0;
  std::size_t failures_ = 0;
  double cost_ = 0.0;
  std::vector<std::uint64_t> ids_;
  std::vector<std::string> prompts_;
};

}  // namespace kcm

#endif  // KCM_BACKEND_HPP_
