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

#include "doctest.h"
#include "kcm/config.hpp"
#include "test_util.hpp"

namespace kcm {
namespace {

ErrorKind KindOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kInvalidArgument;
}

TEST_SUITE("config") {

TEST_CASE("key = value parsing with comments and blank lines") {
  const auto kv = parse_key_values("# comment\nseed = 7\n\n  epsilon=0.9   # inline\narch.hidden = 8, 4\n");
  CHECK(kv.size() == 3);
  CHECK(kv.at("seed") == "7");
  CHECK(kv.at("epsilon") == "0.9");
  CHECK(kv.at("arch.hidden") == "8, 4");
}

TEST_CASE("parse errors name the line") {
  try {
    parse_key_values("seed = 1\nnot a setting\n");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfig);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK(KindOf([] { parse_key_values("a = 1\na = 2\n"); }) == ErrorKind::kConfig);
}

TEST_CASE("settings land in the right fields") {
  RunConfig c;
  apply_settings(c, parse_key_values(
                        "seed = 11\nepsilon = 0.9\narch.kind = mlp\narch.hidden = 8,4\n"
                        "data.classes = 12\nbackend = http\nendpoint = http://127.0.0.1:9/x\n"
                        "kl_direction = teacher_first\nschedule = alternate\nthreads = 3\n"
                        "forget.variant = class_subsets\njudgment.epochs = 7\n"));
  CHECK(*c.seed == 11);
  CHECK(c.route.epsilon == 0.9);
  CHECK(c.distill.epsilon == 0.9);
  CHECK(c.arch.kind == ModelKind::kMlp);
  CHECK(c.arch.hidden == std::vector<int>{8, 4});
  CHECK(c.data.num_classes == 12);
  CHECK(c.backend == BackendKind::kHttp);
  CHECK(c.distill.kl_direction == KlDirection::kTeacherFirst);
  CHECK(c.distill.schedule == DistillSchedule::kAlternate);
  CHECK(c.route.threads == 3);
  CHECK(c.forget_variant == ForgettingVariant::kClassSubsets);
  CHECK(c.judgment.epochs == 7);
}

TEST_CASE("bad keys and values are config errors") {
  RunConfig c;
  CHECK(KindOf([&] { apply_setting(c, "no.such.key", "1"); }) == ErrorKind::kConfig);
  CHECK(KindOf([&] { apply_setting(c, "epochs", "ten"); }) == ErrorKind::kConfig);
  CHECK(KindOf([&] { apply_setting(c, "epsilon", "nan"); }) == ErrorKind::kConfig);
  CHECK(KindOf([&] { apply_setting(c, "backend", "gpt"); }) == ErrorKind::kConfig);
  CHECK(KindOf([&] { apply_setting(c, "arch.hidden", "8,0"); }) == ErrorKind::kConfig);
  CHECK(KindOf([&] { load_run_config("/nonexistent/kcm.conf"); }) == ErrorKind::kConfig);
}

TEST_CASE("resolve requires a seed only when asked and propagates it") {
  RunConfig c;
  CHECK(KindOf([&] { resolve(c, true); }) == ErrorKind::kConfig);
  resolve(c, false);
  c.seed = 42;
  c.route.epsilon = 0.7;
  resolve(c, true);
  CHECK(c.data.seed == 42);
  CHECK(c.oracle.seed == 42);
  CHECK(c.distill.seed == 42);
  CHECK(c.distill.epsilon == 0.7);
  c.route.epsilon = 2.0;
  CHECK(KindOf([&] { resolve(c, true); }) == ErrorKind::kConfig);
}

TEST_CASE("snapshot round trips through the parser") {
  RunConfig c;
  c.seed = 9;
  apply_setting(c, "epsilon", "0.123456789");
  apply_setting(c, "arch.hidden", "5,6,7");
  apply_setting(c, "oracle.tail_accuracy", "0.31");
  resolve(c, true);
  const std::string snap = config_snapshot(c);
  testing::TempDir dir("config");
  write_file(dir.path() / "snap.conf", snap);
  RunConfig back = load_run_config(dir.path() / "snap.conf");
  resolve(back, true);
  CHECK(config_snapshot(back) == snap);
  CHECK(config_json(back).dump() == config_json(c).dump());
  for (const std::string& key : config_keys()) CHECK(snap.find(key + " = ") != std::string::npos);
  CHECK(setting_value(c, "epsilon") == "0.123456789");
}

TEST_CASE("backend construction follows the config") {
  RunConfig c;
  c.seed = 1;
  resolve(c, true);
  const std::vector<std::string> names{"a", "b", "c"};
  CHECK(make_backend(c, names)->name() == "oracle");
  c.backend = BackendKind::kHttp;
  CHECK(KindOf([&] { make_backend(c, names); }) == ErrorKind::kConfig);
  c.endpoint = "http://127.0.0.1:1/predict";
  CHECK(make_backend(c, names)->name() == "http");
}

}  // TEST_SUITE

}  // namespace
}  // namespace kcm
