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

#include "kcm/http_backend.hpp"

#include <thread>

#include "httplib.h"

namespace kcm {

HttpEndpoint parse_endpoint(const std::string& url) {
  const std::size_t scheme = url.find("://");
  require(scheme != std::string::npos, ErrorKind::kConfig,
          "endpoint must look like http://host:port/path, got '" + url + "'");
  require(url.compare(0, scheme, "http") == 0, ErrorKind::kConfig,
          "only plain http endpoints are supported");
  const std::size_t slash = url.find('/', scheme + 3);
  HttpEndpoint e;
  if (slash == std::string::npos) {
    e.scheme_host_port = url;
  } else {
    e.scheme_host_port = url.substr(0, slash);
    e.path = url.substr(slash);
  }
  require(e.scheme_host_port.size() > scheme + 3, ErrorKind::kConfig, "endpoint has no host");
  return e;
}

nlohmann::ordered_json make_request_json(const Sample& sample, const PromptAugmentation& prompt,
                                 const std::vector<std::string>& labels) {
  nlohmann::ordered_json j;
  j["version"] = kWireVersion;
  j["sample_id"] = sample.id;
  j["features"] = sample.features;
  j["prompt"] = prompt.template_text;
  j["labels"] = labels;
  return j;
}

LargeModelResponse parse_response_json(const std::string& body, int label_count) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(BackendFailure::kMalformedResponse,
                       std::string("response is not JSON: ") + e.what());
  }
  LargeModelResponse r;
  try {
    const int version = j.at("version").get<int>();
    if (version != kWireVersion)
      throw BackendError(BackendFailure::kMalformedResponse,
                         "unsupported response version " + std::to_string(version));
    r.distribution = j.at("distribution").get<std::vector<double>>();
    if (j.contains("model_name") && j["model_name"].is_string())
      r.model_name = j["model_name"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(BackendFailure::kMalformedResponse,
                       std::string("response missing fields: ") + e.what());
  }
  validate_response(r, label_count);
  return r;
}

LargeModelResponse http_predict(const HttpBackendConfig& config, const PromptAugmentation& prompt,
                                const Sample& sample) {
  const std::string body = make_request_json(sample, prompt, config.labels).dump();
  const int attempts = config.max_retries + 1;
  auto backoff = config.backoff;
  std::string last_error;
  BackendFailure last_failure = BackendFailure::kTransport;

  for (int attempt = 1; attempt <= attempts; ++attempt) {
    httplib::Client client(config.endpoint.scheme_host_port);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    if (!config.bearer_token.empty()) client.set_bearer_token_auth(config.bearer_token);

    const auto start = std::chrono::steady_clock::now();
    auto result = client.Post(config.endpoint.path, body, "application/json");
    const auto elapsed = std::chrono::steady_clock::now() - start;

    if (!result) {
      const auto err = result.error();
      const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                             (err == httplib::Error::Read && elapsed >= config.timeout * 9 / 10);
      last_failure = timed_out ? BackendFailure::kTimeout : BackendFailure::kTransport;
      last_error = httplib::to_string(err);
    } else if (result->status >= 500) {
      last_failure = BackendFailure::kHttpStatus;
      last_error = "status " + std::to_string(result->status);
    } else if (result->status < 200 || result->status >= 300) {
      throw BackendError(BackendFailure::kHttpStatus,
                         "large model returned status " + std::to_string(result->status), attempt);
    } else {
      LargeModelResponse r = parse_response_json(result->body, static_cast<int>(config.labels.size()));
      r.latency = std::chrono::duration_cast<std::chrono::nanoseconds>(elapsed);
      r.cost_units = config.cost_per_call;
      return r;
    }
    if (attempt < attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw BackendError(last_failure,
                     "large model request failed after " + std::to_string(attempts) +
                         " attempts: " + last_error,
                     attempts);
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  require(!config_.labels.empty(), ErrorKind::kConfig, "HTTP backend needs the class vocabulary");
  require(config_.max_retries >= 0, ErrorKind::kConfig, "max_retries must be nonnegative");
  require(config_.timeout.count() > 0, ErrorKind::kConfig, "timeout must be positive");
}

LargeModelResponse HttpBackend::predict(const Sample& sample, const PromptAugmentation& prompt) {
  return http_predict(config_, prompt, sample);
}

}  // namespace kcm
