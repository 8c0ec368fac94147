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

#ifndef KCM_CONFIG_HPP_
#define KCM_CONFIG_HPP_

// Run configuration shared by the CLI and the experiment drivers.
//
// Config files are plain "key = value" lines; '#' starts a comment. Keys
// are listed by config_keys(). The resolved snapshot written by every run
// uses the same syntax, so it can be fed back with --config.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "kcm/backend.hpp"
#include "kcm/classifier.hpp"
#include "kcm/collaboration.hpp"
#include "kcm/dataset.hpp"
#include "kcm/http_backend.hpp"

namespace kcm {

enum class BackendKind { kOracle, kHttp };
std::string_view to_string(BackendKind b);
BackendKind parse_backend_kind(std::string_view s);

enum class ForgettingVariant { kRegression, kClassSubsets };
std::string_view to_string(ForgettingVariant v);
ForgettingVariant parse_forgetting_variant(std::string_view s);

struct RunConfig {
  std::optional<std::uint64_t> seed;

  LongTailSpec data;
  ArchSpec arch;
  TrainOptions judgment;
  DistillationConfig distill;
  RouteConfig route;

  BackendKind backend = BackendKind::kOracle;
  OracleSpec oracle;
  std::string endpoint;
  int http_timeout_ms = 5000;
  int http_max_retries = 2;
  int http_backoff_ms = 100;
  double http_cost_per_call = 1.0;

  ModelKind ablation_first = ModelKind::kKan;
  ModelKind ablation_second = ModelKind::kMlp;

  ModelKind forget_model = ModelKind::kKan;
  ForgettingVariant forget_variant = ForgettingVariant::kRegression;
  int forget_phases = 5;
  bool forget_frozen = false;

  std::string data_dir = "data";
  std::string models_dir = "models";
  std::string out_dir = "out";
};

// Every accepted key, in snapshot order.
const std::vector<std::string>& config_keys();

// Parses "key = value" lines. Errors name the offending line.
std::map<std::string, std::string> parse_key_values(std::string_view text);

// Applies one setting; unknown keys and malformed values throw kConfig.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);
void apply_settings(RunConfig& config, const std::map<std::string, std::string>& values);

RunConfig load_run_config(const std::filesystem::path& path);

// Propagates the single run seed into every seeded component and copies
// shared settings (epsilon, top-k) between the training and routing halves.
// Throws kConfig if the seed is required but missing.
void resolve(RunConfig& config, bool seed_required);

// Reads one setting back in canonical text form.
std::string setting_value(const RunConfig& config, const std::string& key);

// Canonical snapshot: one "key = value" line per key in config_keys() order.
std::string config_snapshot(const RunConfig& config);
nlohmann::ordered_json config_json(const RunConfig& config);

// Large-model backend described by the config. The bearer token for HTTP is
// read from the environment.
std::unique_ptr<LargeModelBackend> make_backend(const RunConfig& config,
                                                const std::vector<std::string>& class_names);

}  // namespace kcm

#endif  // KCM_CONFIG_HPP_
