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
#include <chrono>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "kcm/backend.hpp"
#include "kcm/http_backend.hpp"

namespace kcm {
namespace {

using namespace std::chrono_literals;

// Loopback server on an ephemeral port, stopped on destruction.
class StubServer {
 public:
  explicit StubServer(httplib::Server::Handler handler) {
    server_.Post("/predict", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  HttpBackendConfig config(int labels) const {
    HttpBackendConfig c;
    c.endpoint = parse_endpoint("http://127.0.0.1:" + std::to_string(port_) + "/predict");
    for (int i = 0; i < labels; ++i) c.labels.push_back("c" + std::to_string(i));
    c.timeout = 300ms;
    c.backoff = 1ms;
    return c;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

Sample MakeSample(std::uint64_t id, int label, Region region) {
  Sample s;
  s.id = id;
  s.label = label;
  s.region = region;
  s.features = {0.5, -1.0};
  return s;
}

BackendFailure FailureOf(const HttpBackendConfig& c) {
  try {
    http_predict(c, PromptAugmentation{}, MakeSample(1, 0, Region::kHead));
  } catch (const BackendError& e) {
    return e.failure();
  }
  FAIL("expected a backend error");
  return BackendFailure::kTransport;
}

TEST_SUITE("backend") {

TEST_CASE("oracle accuracy per region follows its configuration") {
  OracleSpec spec;
  spec.label_count = 10;
  spec.head_accuracy = 1.0;
  spec.med_accuracy = 0.0;
  spec.tail_accuracy = 0.6;
  spec.seed = 3;
  int hits[3] = {0, 0, 0};
  const int n = 20000;
  const Region regions[3] = {Region::kHead, Region::kMed, Region::kTail};
  for (int r = 0; r < 3; ++r)
    for (int i = 0; i < n; ++i) {
      const Sample s = MakeSample(static_cast<std::uint64_t>(r * n + i), i % 10, regions[r]);
      const LargeModelResponse resp = oracle_predict(spec, s);
      int arg = 0;
      for (int c = 1; c < 10; ++c)
        if (resp.distribution[c] > resp.distribution[arg]) arg = c;
      hits[r] += arg == s.label;
      double sum = 0.0;
      for (double p : resp.distribution) sum += p;
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  CHECK(hits[0] == n);
  CHECK(hits[1] == 0);
  CHECK(std::abs(hits[2] / static_cast<double>(n) - 0.6) <= 0.01);
}

TEST_CASE("oracle answers are a pure function of seed and sample id") {
  OracleSpec spec;
  spec.label_count = 5;
  spec.seed = 9;
  const Sample s = MakeSample(42, 3, Region::kMed);
  const auto a = oracle_predict(spec, s);
  CHECK(oracle_predict(spec, s).distribution == a.distribution);
  OracleBackend backend(spec);
  CHECK(backend.predict(s, PromptAugmentation{}).distribution == a.distribution);
  CHECK_THROWS_AS(oracle_predict(spec, MakeSample(1, 0, Region::kUnknown)), BackendError);
}

TEST_CASE("response validation") {
  LargeModelResponse r;
  r.distribution = {0.25, 0.25, 0.25, 0.25};
  validate_response(r, 4);
  CHECK(r.confidence == 0.25);
  r.distribution = {0.3, 0.3, 0.3};
  CHECK_THROWS_AS(validate_response(r, 3), BackendError);
  r.distribution = {1.1, -0.1};
  CHECK_THROWS_AS(validate_response(r, 2), BackendError);
  r.distribution = {0.5, 0.5};
  CHECK_THROWS_AS(validate_response(r, 3), BackendError);
}

TEST_CASE("http backend parses a uniform distribution") {
  StubServer server([](const httplib::Request& req, httplib::Response& res) {
    const auto j = nlohmann::json::parse(req.body);
    CHECK(j["version"] == 1);
    CHECK(j["labels"].size() == 4);
    res.set_content(R"({"version":1,"distribution":[0.25,0.25,0.25,0.25],"model_name":"stub"})",
                    "application/json");
  });
  HttpBackend backend(server.config(4));
  const auto r = backend.predict(MakeSample(1, 0, Region::kHead), PromptAugmentation{});
  CHECK(r.confidence == 0.25);
  CHECK(r.model_name == "stub");
  CHECK(r.cost_units == 1.0);
}

TEST_CASE("http backend rejects a distribution that does not sum to one") {
  StubServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"version":1,"distribution":[0.3,0.3,0.3]})", "application/json");
  });
  CHECK(FailureOf(server.config(3)) == BackendFailure::kMalformedResponse);
}

TEST_CASE("timeouts are retried exactly max_retries times") {
  std::atomic<int> hits{0};
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    std::this_thread::sleep_for(600ms);
    res.set_content(R"({"version":1,"distribution":[1.0]})", "application/json");
  });
  HttpBackendConfig c = server.config(1);
  c.max_retries = 2;
  try {
    http_predict(c, PromptAugmentation{}, MakeSample(1, 0, Region::kHead));
    FAIL("expected a timeout");
  } catch (const BackendError& e) {
    CHECK(e.failure() == BackendFailure::kTimeout);
    CHECK(e.attempts() == 3);
  }
  CHECK(hits.load() == 3);
}

TEST_CASE("client errors are not retried, server errors are") {
  std::atomic<int> hits{0};
  int status = 404;
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = status;
  });
  HttpBackendConfig c = server.config(2);
  c.max_retries = 3;
  CHECK(FailureOf(c) == BackendFailure::kHttpStatus);
  CHECK(hits.load() == 1);
  hits = 0;
  status = 503;
  CHECK(FailureOf(c) == BackendFailure::kHttpStatus);
  CHECK(hits.load() == 4);
}

TEST_CASE("bearer token is sent when configured") {
  std::string seen;
  StubServer server([&](const httplib::Request& req, httplib::Response& res) {
    seen = req.get_header_value("Authorization");
    res.set_content(R"({"version":1,"distribution":[0.5,0.5]})", "application/json");
  });
  HttpBackendConfig c = server.config(2);
  c.bearer_token = "s3cret";
  http_predict(c, PromptAugmentation{}, MakeSample(1, 0, Region::kHead));
  CHECK(seen == "Bearer s3cret");
}

TEST_CASE("unreachable endpoint is a transport failure") {
  HttpBackendConfig c;
  c.endpoint = parse_endpoint("http://127.0.0.1:1/predict");
  c.labels = {"a", "b"};
  c.max_retries = 0;
  c.timeout = 300ms;
  CHECK(FailureOf(c) == BackendFailure::kTransport);
}

TEST_CASE("endpoint parsing") {
  const auto e = parse_endpoint("http://localhost:8080/v1/predict");
  CHECK(e.scheme_host_port == "http://localhost:8080");
  CHECK(e.path == "/v1/predict");
  CHECK(parse_endpoint("http://h:1").path == "/predict");
  CHECK_THROWS_AS(parse_endpoint("localhost:8080"), Error);
  CHECK_THROWS_AS(parse_endpoint("https://x/"), Error);
}

TEST_CASE("counting backend tallies calls, failures and cost") {
  OracleSpec spec;
  spec.label_count = 3;
  spec.cost_per_call = 2.5;
  OracleBackend oracle(spec);
  CountingBackend counter(oracle);
  counter.predict(MakeSample(1, 0, Region::kHead), PromptAugmentation{});
  counter.predict(MakeSample(2, 1, Region::kTail), PromptAugmentation{});
  CHECK_THROWS(counter.predict(MakeSample(3, 1, Region::kUnknown), PromptAugmentation{}));
  CHECK(counter.calls() == 3);
  CHECK(counter.failures() == 1);
  CHECK(counter.cost_units() == 5.0);
  CHECK(counter.sample_ids() == std::vector<std::uint64_t>{1, 2, 3});
}

}  // TEST_SUITE

}  // namespace
}  // namespace kcm
