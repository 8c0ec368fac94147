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

#ifndef KCM_HTTP_BACKEND_HPP_
#define KCM_HTTP_BACKEND_HPP_

// HTTP transport for a remote large model.
//
// Request (POST, application/json):
//   {"version": 1, "sample_id": <u64>, "features": [..], "prompt": "<text>",
//    "labels": ["<class name>", ...]}
// Response:
//   {"version": 1, "distribution": [..one probability per label..],
//    "model_name": "<string>"}
//
// Timeouts, transport errors and 5xx statuses are retried with exponential
// backoff; 4xx statuses and malformed responses fail immediately.

#include <chrono>
#include <string>
#include <vector>

#include "json.hpp"
#include "kcm/backend.hpp"

namespace kcm {

inline constexpr int kWireVersion = 1;
inline constexpr const char* kBearerTokenEnv = "KCM_BACKEND_TOKEN";

struct HttpEndpoint {
  std::string scheme_host_port;  // e.g. "http://127.0.0.1:8080"
  std::string path = "/predict";
};

// Splits "http://host:port/path" into its base URL and path.
HttpEndpoint parse_endpoint(const std::string& url);

struct HttpBackendConfig {
  HttpEndpoint endpoint;
  std::vector<std::string> labels;
  std::chrono::milliseconds timeout{5000};
  int max_retries = 2;
  std::chrono::milliseconds backoff{100};  // doubled after each failed attempt
  double cost_per_call = 1.0;
  std::string bearer_token;  // empty: no Authorization header
};

nlohmann::ordered_json make_request_json(const Sample& sample, const PromptAugmentation& prompt,
                                 const std::vector<std::string>& labels);
// Parses and validates a response body; throws BackendError.
LargeModelResponse parse_response_json(const std::string& body, int label_count);

// One request/response exchange with retries.
LargeModelResponse http_predict(const HttpBackendConfig& config, const PromptAugmentation& prompt,
                                const Sample& sample);

class HttpBackend final : public LargeModelBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  LargeModelResponse predict(const Sample& sample, const PromptAugmentation& prompt) override;
  std::string name() const override { return "http"; }

 private:
  HttpBackendConfig config_;
};

}  // namespace kcm

#endif  // KCM_HTTP_BACKEND_HPP_
