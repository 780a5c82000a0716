// SPDX-License-Identifier: Apache-2.0
#pragma once

// RunConfig: the single JSON document every command reads. Command-line flags
// and --set key=value overrides are applied on top of it.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace uala::app {

struct RunConfig {
  // data
  std::string dataset = "hotpotqa";
  std::string data;  // evaluation items
  std::string data_format = "canonical";
  std::string train_data;  // calibration items; empty: use `data`
  std::string train_format = "canonical";
  std::uint64_t seed = 233;
  std::size_t count = 0;
  std::size_t per_task = 0;
  std::size_t train_count = 0;

  // method
  std::string mode = "uala-s";
  std::string base_mode;  // empty: per-dataset default
  std::string estimator = "entropy";
  std::string softmax_scope = "sequence";
  std::string threshold = "quantile";
  double q = 0.9;
  bool backoff = false;
  std::string oracle = "off";
  double oracle_timeout_s = 1800.0;
  std::optional<double> verbal_threshold;
  std::size_t max_steps = 7;
  std::size_t max_tokens = 256;
  std::size_t k = 9;
  double temperature = 0.7;

  // providers
  std::string provider = "replay";  // live | scripted | replay
  std::string script;
  std::string replay;
  std::string record;  // write every completion to this replay fixture
  std::string llm_url;
  std::string llm_model;
  std::string tools = "mock";  // mock | live | tape
  std::string corpus;
  std::string tape;  // tape file: replayed with tools=tape, recorded with tools=live
  std::string wiki_url = "https://en.wikipedia.org";
  std::string search_url = "https://serpapi.com";
  std::string prompts;  // empty: installed prompt directory

  // execution and output
  std::size_t workers = 1;
  std::size_t max_in_flight = 4;
  std::string profile;  // calibration profile path
  std::string calibration_set;
  std::string out_dir = "uala-out";
  std::string created_at;  // empty: current UTC time
};

nlohmann::json to_json(const RunConfig& c);
/// Unknown keys and anything that looks like a secret are ConfigErrors.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

/// Applies "key=value"; the value is parsed as JSON when it parses, else taken
/// as a string ("--set q=0.5", "--set backoff=true", "--set llm_model=gpt").
void apply_override(RunConfig& c, std::string_view assignment);

/// Cross-field consistency (mode vs profile, verbal threshold, provider paths).
void check(const RunConfig& c);

}  // namespace uala::app
