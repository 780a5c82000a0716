// SPDX-License-Identifier: Apache-2.0
#include "config.hpp"

#include <fstream>

#include <fmt/format.h>

#include "uala/error.hpp"
#include "uala/normalize.hpp"

namespace uala::app {

using nlohmann::json;

namespace {

// One table drives both directions so the key set cannot drift.
template <class Visit>
void fields(RunConfig& c, Visit&& v) {
  v("dataset", c.dataset);
  v("data", c.data);
  v("data_format", c.data_format);
  v("train_data", c.train_data);
  v("train_format", c.train_format);
  v("seed", c.seed);
  v("count", c.count);
  v("per_task", c.per_task);
  v("train_count", c.train_count);
  v("mode", c.mode);
  v("base_mode", c.base_mode);
  v("estimator", c.estimator);
  v("softmax_scope", c.softmax_scope);
  v("threshold", c.threshold);
  v("q", c.q);
  v("backoff", c.backoff);
  v("oracle", c.oracle);
  v("oracle_timeout_s", c.oracle_timeout_s);
  v("verbal_threshold", c.verbal_threshold);
  v("max_steps", c.max_steps);
  v("max_tokens", c.max_tokens);
  v("k", c.k);
  v("temperature", c.temperature);
  v("provider", c.provider);
  v("script", c.script);
  v("replay", c.replay);
  v("record", c.record);
  v("llm_url", c.llm_url);
  v("llm_model", c.llm_model);
  v("tools", c.tools);
  v("corpus", c.corpus);
  v("tape", c.tape);
  v("wiki_url", c.wiki_url);
  v("search_url", c.search_url);
  v("prompts", c.prompts);
  v("workers", c.workers);
  v("max_in_flight", c.max_in_flight);
  v("profile", c.profile);
  v("calibration_set", c.calibration_set);
  v("out_dir", c.out_dir);
  v("created_at", c.created_at);
}

template <class T>
void read_field(const json& j, T& out) {
  out = j.get<T>();
}

template <class T>
void read_field(const json& j, std::optional<T>& out) {
  if (j.is_null()) {
    out.reset();
  } else {
    out = j.get<T>();
  }
}

bool looks_secret(std::string_view key) {
  const std::string k = to_lower_ascii(key);
  return k.find("api_key") != std::string::npos || k.find("apikey") != std::string::npos ||
         k.find("secret") != std::string::npos || k.find("token") == 0 || k.find("password") != std::string::npos;
}

void set_field(RunConfig& c, const std::string& key, const json& value) {
  if (looks_secret(key)) {
    throw Error(ErrorCode::ConfigError,
                fmt::format("'{}' looks like a secret; API keys are read from environment variables only", key));
  }
  bool found = false;
  fields(c, [&](const char* name, auto& field) {
    if (key != name) return;
    found = true;
    try {
      read_field(value, field);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigError, fmt::format("config key '{}': {}", key, e.what()));
    }
  });
  if (!found) throw Error(ErrorCode::ConfigError, fmt::format("unknown config key '{}'", key));
}

}  // namespace

json to_json(const RunConfig& c) {
  json j = json::object();
  RunConfig copy = c;
  fields(copy, [&](const char* name, const auto& field) {
    using T = std::decay_t<decltype(field)>;
    if constexpr (std::is_same_v<T, std::optional<double>>) {
      j[name] = field ? json(*field) : json(nullptr);
    } else {
      j[name] = field;
    }
  });
  return j;
}

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
  RunConfig c;
  for (const auto& [key, value] : j.items()) set_field(c, key, value);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, fmt::format("cannot open config {}", path.string()));
  RunConfig c;
  json j;
  try {
    j = json::parse(in);
    c = config_from_json(j);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, fmt::format("{}: {}", path.string(), e.what()));
  }
  // Relative paths written in a config file are relative to that file.
  const std::filesystem::path base = path.parent_path();
  const std::pair<const char*, std::string*> paths[] = {
      {"data", &c.data},       {"train_data", &c.train_data}, {"script", &c.script},
      {"replay", &c.replay},   {"record", &c.record},         {"corpus", &c.corpus},
      {"tape", &c.tape},       {"prompts", &c.prompts},       {"profile", &c.profile},
      {"calibration_set", &c.calibration_set},                {"out_dir", &c.out_dir}};
  for (const auto& [key, p] : paths) {
    if (j.contains(key) && !p->empty() && std::filesystem::path(*p).is_relative()) {
      *p = (base / *p).lexically_normal().string();
    }
  }
  return c;
}

void apply_override(RunConfig& c, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw Error(ErrorCode::ConfigError, fmt::format("override '{}' is not key=value", assignment));
  }
  const std::string key = trim(assignment.substr(0, eq));
  const std::string raw = trim(assignment.substr(eq + 1));
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  // A string field given a bare number ("--set llm_model=7") stays a string.
  RunConfig probe;
  bool is_string = false;
  fields(probe, [&](const char* name, const auto& field) {
    if (key == name) is_string = std::is_same_v<std::decay_t<decltype(field)>, std::string>;
  });
  if (is_string && !value.is_string()) value = raw;
  set_field(c, key, value);
}

void check(const RunConfig& c) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); };
  if (c.provider == "scripted" && c.script.empty()) fail("provider 'scripted' needs 'script'");
  if (c.provider == "replay" && c.replay.empty()) fail("provider 'replay' needs 'replay'");
  if (c.provider != "live" && c.provider != "scripted" && c.provider != "replay") {
    fail(fmt::format("unknown provider '{}'", c.provider));
  }
  if (c.tools == "mock" && c.corpus.empty()) fail("tools 'mock' needs 'corpus'");
  if (c.tools == "tape" && c.tape.empty()) fail("tools 'tape' needs 'tape'");
  if (c.tools != "mock" && c.tools != "live" && c.tools != "tape") fail(fmt::format("unknown tools '{}'", c.tools));
  if (c.workers == 0) fail("workers must be at least 1");
  if (c.max_in_flight == 0) fail("max_in_flight must be at least 1");
}

}  // namespace uala::app
