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

#include "kcm/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <functional>

namespace kcm {

std::string_view to_string(BackendKind b) { return b == BackendKind::kOracle ? "oracle" : "http"; }

BackendKind parse_backend_kind(std::string_view s) {
  if (s == "oracle") return BackendKind::kOracle;
  if (s == "http") return BackendKind::kHttp;
  fail(ErrorKind::kConfig, "backend must be oracle or http, got '" + std::string(s) + "'");
}

std::string_view to_string(ForgettingVariant v) {
  return v == ForgettingVariant::kRegression ? "regression" : "class_subsets";
}

ForgettingVariant parse_forgetting_variant(std::string_view s) {
  if (s == "regression") return ForgettingVariant::kRegression;
  if (s == "class_subsets") return ForgettingVariant::kClassSubsets;
  fail(ErrorKind::kConfig, "forget.variant must be regression or class_subsets");
}

namespace {

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T ParseNumber(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  require(ec == std::errc() && ptr == v.data() + v.size() && !v.empty(), ErrorKind::kConfig,
          "invalid value '" + v + "' for " + key);
  return out;
}

double ParseReal(const std::string& key, const std::string& v) {
  const double d = ParseNumber<double>(key, v);
  require(std::isfinite(d), ErrorKind::kConfig, key + " must be finite");
  return d;
}

bool ParseBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorKind::kConfig, key + " must be true or false");
}

std::vector<int> ParseIntList(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos < v.size()) {
    std::size_t comma = v.find(',', pos);
    if (comma == std::string::npos) comma = v.size();
    const int n = ParseNumber<int>(key, Trim(std::string_view(v).substr(pos, comma - pos)));
    require(n >= 1, ErrorKind::kConfig, key + " entries must be positive");
    out.push_back(n);
    pos = comma + 1;
  }
  return out;
}

std::string JoinInts(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define KCM_REAL(name, member)                                                  \
  Field {                                                                       \
    name, [](RunConfig& c, const std::string& v) { c.member = ParseReal(name, v); }, \
        [](const RunConfig& c) { return format_double(c.member); }             \
  }
#define KCM_INT(name, member)                                                          \
  Field {                                                                              \
    name, [](RunConfig& c, const std::string& v) { c.member = ParseNumber<int>(name, v); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }                   \
  }

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = {
      {"seed",
       [](RunConfig& c, const std::string& v) { c.seed = ParseNumber<std::uint64_t>("seed", v); },
       [](const RunConfig& c) { return c.seed ? std::to_string(*c.seed) : std::string(); }},
      {"epsilon",
       [](RunConfig& c, const std::string& v) {
         c.route.epsilon = c.distill.epsilon = ParseReal("epsilon", v);
       },
       [](const RunConfig& c) { return format_double(c.route.epsilon); }},
      KCM_REAL("learning_rate", distill.learning_rate),
      KCM_INT("epochs", distill.epochs),
      KCM_INT("batch_size", distill.batch_size),
      {"kl_direction",
       [](RunConfig& c, const std::string& v) { c.distill.kl_direction = parse_kl_direction(v); },
       [](const RunConfig& c) { return std::string(to_string(c.distill.kl_direction)); }},
      KCM_REAL("loss_mix", distill.loss_mix),
      KCM_REAL("max_grad_norm", distill.max_grad_norm),
      {"schedule",
       [](RunConfig& c, const std::string& v) { c.distill.schedule = parse_distill_schedule(v); },
       [](const RunConfig& c) { return std::string(to_string(c.distill.schedule)); }},
      {"prompt_top_k",
       [](RunConfig& c, const std::string& v) {
         c.route.prompt_top_k = c.distill.prompt_top_k = ParseNumber<int>("prompt_top_k", v);
       },
       [](const RunConfig& c) { return std::to_string(c.route.prompt_top_k); }},
      {"second_gate",
       [](RunConfig& c, const std::string& v) { c.route.second_gate = parse_second_gate(v); },
       [](const RunConfig& c) { return std::string(to_string(c.route.second_gate)); }},
      KCM_INT("threads", route.threads),
      KCM_INT("max_in_flight", route.max_in_flight),

      KCM_INT("judgment.epochs", judgment.epochs),
      KCM_REAL("judgment.learning_rate", judgment.learning_rate),
      KCM_INT("judgment.batch_size", judgment.batch_size),

      {"arch.kind", [](RunConfig& c, const std::string& v) { c.arch.kind = parse_model_kind(v); },
       [](const RunConfig& c) { return std::string(to_string(c.arch.kind)); }},
      {"arch.hidden",
       [](RunConfig& c, const std::string& v) { c.arch.hidden = ParseIntList("arch.hidden", v); },
       [](const RunConfig& c) { return JoinInts(c.arch.hidden); }},
      KCM_INT("arch.order", arch.order),
      KCM_INT("arch.intervals", arch.intervals),
      KCM_REAL("arch.input_spread", arch.input_spread),

      KCM_INT("data.classes", data.num_classes),
      KCM_INT("data.feature_dim", data.feature_dim),
      KCM_INT("data.max_per_class", data.max_per_class),
      KCM_REAL("data.imbalance", data.imbalance),
      KCM_REAL("data.separation", data.separation),
      KCM_REAL("data.noise", data.noise),
      KCM_INT("data.val_per_class", data.val_per_class),
      KCM_INT("data.test_per_class", data.test_per_class),

      {"backend", [](RunConfig& c, const std::string& v) { c.backend = parse_backend_kind(v); },
       [](const RunConfig& c) { return std::string(to_string(c.backend)); }},
      KCM_REAL("oracle.head_accuracy", oracle.head_accuracy),
      KCM_REAL("oracle.med_accuracy", oracle.med_accuracy),
      KCM_REAL("oracle.tail_accuracy", oracle.tail_accuracy),
      KCM_REAL("oracle.correct_confidence_lo", oracle.when_correct.lo),
      KCM_REAL("oracle.correct_confidence_hi", oracle.when_correct.hi),
      KCM_REAL("oracle.wrong_confidence_lo", oracle.when_wrong.lo),
      KCM_REAL("oracle.wrong_confidence_hi", oracle.when_wrong.hi),
      KCM_REAL("oracle.cost_per_call", oracle.cost_per_call),
      {"endpoint", [](RunConfig& c, const std::string& v) { c.endpoint = v; },
       [](const RunConfig& c) { return c.endpoint; }},
      KCM_INT("http.timeout_ms", http_timeout_ms),
      KCM_INT("http.max_retries", http_max_retries),
      KCM_INT("http.backoff_ms", http_backoff_ms),
      KCM_REAL("http.cost_per_call", http_cost_per_call),

      {"ablation.first",
       [](RunConfig& c, const std::string& v) { c.ablation_first = parse_model_kind(v); },
       [](const RunConfig& c) { return std::string(to_string(c.ablation_first)); }},
      {"ablation.second",
       [](RunConfig& c, const std::string& v) { c.ablation_second = parse_model_kind(v); },
       [](const RunConfig& c) { return std::string(to_string(c.ablation_second)); }},

      {"forget.model",
       [](RunConfig& c, const std::string& v) { c.forget_model = parse_model_kind(v); },
       [](const RunConfig& c) { return std::string(to_string(c.forget_model)); }},
      {"forget.variant",
       [](RunConfig& c, const std::string& v) { c.forget_variant = parse_forgetting_variant(v); },
       [](const RunConfig& c) { return std::string(to_string(c.forget_variant)); }},
      KCM_INT("forget.phases", forget_phases),
      {"forget.frozen",
       [](RunConfig& c, const std::string& v) { c.forget_frozen = ParseBool("forget.frozen", v); },
       [](const RunConfig& c) { return std::string(c.forget_frozen ? "true" : "false"); }},

      {"data_dir", [](RunConfig& c, const std::string& v) { c.data_dir = v; },
       [](const RunConfig& c) { return c.data_dir; }},
      {"models_dir", [](RunConfig& c, const std::string& v) { c.models_dir = v; },
       [](const RunConfig& c) { return c.models_dir; }},
      {"out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; },
       [](const RunConfig& c) { return c.out_dir; }},
  };
  return fields;
}

#undef KCM_REAL
#undef KCM_INT

const Field& FindField(const std::string& key) {
  for (const Field& f : Fields())
    if (f.key == key) return f;
  fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const Field& f : Fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string trimmed = Trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    require(eq != std::string::npos, ErrorKind::kConfig,
            "config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = Trim(std::string_view(trimmed).substr(0, eq));
    require(!key.empty(), ErrorKind::kConfig,
            "config line " + std::to_string(line_no) + ": missing key");
    require(!out.contains(key), ErrorKind::kConfig,
            "config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    out[key] = Trim(std::string_view(trimmed).substr(eq + 1));
  }
  return out;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  const Field& f = FindField(key);
  if (key == "seed" && value.empty()) {
    config.seed.reset();
    return;
  }
  f.set(config, value);
}

void apply_settings(RunConfig& config, const std::map<std::string, std::string>& values) {
  for (const auto& [k, v] : values) apply_setting(config, k, v);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, std::string("cannot read config: ") + e.what());
  }
  RunConfig c;
  apply_settings(c, parse_key_values(text));
  return c;
}

void resolve(RunConfig& c, bool seed_required) {
  require(!seed_required || c.seed.has_value(), ErrorKind::kConfig,
          "a seed is required for this command (--seed or seed = ... in the config)");
  const std::uint64_t seed = c.seed.value_or(0);
  c.data.seed = seed;
  c.oracle.seed = seed;
  c.distill.seed = seed;
  c.distill.epsilon = c.route.epsilon;
  c.distill.prompt_top_k = c.route.prompt_top_k;
  validate(c.data);
  validate(c.route);
  require(c.judgment.epochs >= 0 && c.judgment.learning_rate > 0.0 && c.judgment.batch_size >= 1,
          ErrorKind::kConfig, "judgment training options are invalid");
  require(c.arch.order >= 1 && c.arch.intervals >= 1, ErrorKind::kConfig,
          "arch.order and arch.intervals must be positive");
  require(c.http_timeout_ms > 0 && c.http_max_retries >= 0 && c.http_backoff_ms >= 0,
          ErrorKind::kConfig, "http timeout/retry settings are invalid");
  require(c.forget_phases >= 1, ErrorKind::kConfig, "forget.phases must be at least 1");
}

std::string setting_value(const RunConfig& config, const std::string& key) {
  return FindField(key).get(config);
}

std::string config_snapshot(const RunConfig& config) {
  std::string out;
  for (const Field& f : Fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

nlohmann::ordered_json config_json(const RunConfig& config) {
  nlohmann::ordered_json j;
  for (const Field& f : Fields()) j[f.key] = f.get(config);
  return j;
}

std::unique_ptr<LargeModelBackend> make_backend(const RunConfig& config,
                                                const std::vector<std::string>& class_names) {
  if (config.backend == BackendKind::kOracle) {
    OracleSpec spec = config.oracle;
    spec.label_count = static_cast<int>(class_names.size());
    spec.seed = config.seed.value_or(0);
    return std::make_unique<OracleBackend>(spec);
  }
  require(!config.endpoint.empty(), ErrorKind::kConfig, "backend = http needs an endpoint");
  HttpBackendConfig h;
  h.endpoint = parse_endpoint(config.endpoint);
  h.labels = class_names;
  h.timeout = std::chrono::milliseconds(config.http_timeout_ms);
  h.max_retries = config.http_max_retries;
  h.backoff = std::chrono::milliseconds(config.http_backoff_ms);
  h.cost_per_call = config.http_cost_per_call;
  if (const char* token = std::getenv(kBearerTokenEnv)) h.bearer_token = token;
  return std::make_unique<HttpBackend>(std::move(h));
}

}  // namespace kcm
