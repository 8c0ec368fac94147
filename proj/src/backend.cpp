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

#include "kcm/backend.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace kcm {

std::string_view to_string(BackendFailure f) {
  switch (f) {
    case BackendFailure::kTimeout:
      return "timeout";
    case BackendFailure::kMalformedResponse:
      return "malformed_response";
    case BackendFailure::kHttpStatus:
      return "http_status";
    case BackendFailure::kTransport:
      return "transport";
    case BackendFailure::kInvalidRequest:
      return "invalid_request";
  }
  return "unknown";
}

void validate_response(LargeModelResponse& response, int label_count) {
  const auto& d = response.distribution;
  if (static_cast<int>(d.size()) != label_count)
    throw BackendError(BackendFailure::kMalformedResponse,
                       "distribution has " + std::to_string(d.size()) + " entries, expected " +
                           std::to_string(label_count));
  double sum = 0.0;
  for (double p : d) {
    if (!std::isfinite(p) || p < 0.0)
      throw BackendError(BackendFailure::kMalformedResponse,
                         "distribution entry is negative or non-finite");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw BackendError(BackendFailure::kMalformedResponse,
                       "distribution sums to " + format_double(sum) + ", not 1");
  response.confidence = *std::max_element(d.begin(), d.end());
}

void validate(const OracleSpec& spec) {
  require(spec.label_count >= 2, ErrorKind::kConfig, "oracle needs at least two labels");
  for (double a : {spec.head_accuracy, spec.med_accuracy, spec.tail_accuracy})
    require(a >= 0.0 && a <= 1.0, ErrorKind::kConfig, "oracle accuracies must lie in [0, 1]");
  for (const ConfidenceRange& r : {spec.when_correct, spec.when_wrong})
    require(r.lo >= 0.0 && r.lo <= r.hi && r.hi <= 1.0, ErrorKind::kConfig,
            "oracle confidence ranges must satisfy 0 <= lo <= hi <= 1");
  require(spec.cost_per_call >= 0.0, ErrorKind::kConfig, "oracle cost must be nonnegative");
}

LargeModelResponse oracle_predict(const OracleSpec& spec, const Sample& sample) {
  double acc = 0.0;
  switch (sample.region) {
    case Region::kHead:
      acc = spec.head_accuracy;
      break;
    case Region::kMed:
      acc = spec.med_accuracy;
      break;
    case Region::kTail:
      acc = spec.tail_accuracy;
      break;
    case Region::kUnknown:
      throw BackendError(BackendFailure::kInvalidRequest,
                         "oracle needs a region tag for sample " + std::to_string(sample.id));
  }
  const int classes = spec.label_count;
  require(sample.label >= 0 && sample.label < classes, ErrorKind::kData,
          "sample label outside the oracle's label set");

  const std::uint64_t h0 = splitmix64(spec.seed ^ splitmix64(sample.id));
  const std::uint64_t h1 = splitmix64(h0);
  const std::uint64_t h2 = splitmix64(h1);
  const bool correct = unit_interval(h0) < acc;
  int predicted = sample.label;
  if (!correct) {
    const int pick = static_cast<int>(unit_interval(h1) * (classes - 1));
    predicted = pick < sample.label ? pick : pick + 1;
  }
  const ConfidenceRange& range = correct ? spec.when_correct : spec.when_wrong;
  double conf = range.lo + unit_interval(h2) * (range.hi - range.lo);
  // The predicted class must stay the unique argmax.
  conf = std::max(conf, 1.0 / classes + 1e-6);
  const double rest = (1.0 - conf) / (classes - 1);

  LargeModelResponse r;
  r.distribution.assign(classes, rest);
  r.distribution[predicted] = conf;
  r.confidence = conf;
  r.cost_units = spec.cost_per_call;
  r.model_name = "oracle";
  return r;
}

OracleBackend::OracleBackend(OracleSpec spec) : spec_(spec) { validate(spec_); }

LargeModelResponse OracleBackend::predict(const Sample& sample, const PromptAugmentation&) {
  return oracle_predict(spec_, sample);
}

LargeModelResponse CountingBackend::predict(const Sample& sample, const PromptAugmentation& prompt) {
  {
    std::lock_guard lock(mu_);
    ++calls_;
    ids_.push_back(sample.id);
    prompts_.push_back(prompt.template_text);
  }
  try {
    LargeModelResponse r = inner_.predict(sample, prompt);
    std::lock_guard lock(mu_);
    cost_ += r.cost_units;
    return r;
  } catch (...) {
    std::lock_guard lock(mu_);
    ++failures_;
    throw;
  }
}

std::size_t CountingBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}
std::size_t CountingBackend::failures() const {
  std::lock_guard lock(mu_);
  return failures_;
}
double CountingBackend::cost_units() const {
  std::lock_guard lock(mu_);
  return cost_;
}
std::vector<std::uint64_t> CountingBackend::sample_ids() const {
  std::lock_guard lock(mu_);
  return ids_;
}
std::vector<std::string> CountingBackend::prompts() const {
  std::lock_guard lock(mu_);
  return prompts_;
}
void CountingBackend::reset() {
  std::lock_guard lock(mu_);
  calls_ = failures_ = 0;
  cost_ = 0.0;
  ids_.clear();
  prompts_.clear();
}

}  // namespace kcm
