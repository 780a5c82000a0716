// SPDX-License-Identifier: Apache-2.0
#include <fstream>

#include <gtest/gtest.h>

#include "support/app_fixture.hpp"

namespace uala::app {
namespace {

using testing::expect_error;
using testing::TempDir;

TEST(Config, JsonRoundTrip) {
  RunConfig c;
  c.mode = "uala-m";
  c.verbal_threshold = 0.8;
  c.k = 5;
  const auto j = to_json(c);
  EXPECT_EQ(to_json(config_from_json(j)), j);
  EXPECT_TRUE(to_json(RunConfig{})["verbal_threshold"].is_null());
}

TEST(Config, SecretsAndUnknownKeysAreRejected) {
  for (const char* key : {"api_key", "openai_api_key", "llm_secret", "token", "password"}) {
    expect_error(ErrorCode::ConfigError, [&] { config_from_json({{key, "x"}}); });
  }
  expect_error(ErrorCode::ConfigError, [] { config_from_json({{"no_such_key", 1}}); });
  expect_error(ErrorCode::ConfigError, [] { config_from_json({{"k", "nine"}}); });
  expect_error(ErrorCode::ConfigError, [] { config_from_json(nlohmann::json::array()); });
  RunConfig c;
  expect_error(ErrorCode::ConfigError, [&] { apply_override(c, "search_api_key=abc"); });
}

TEST(Config, OverridesParseJsonOrString) {
  RunConfig c;
  apply_override(c, "q=0.5");
  apply_override(c, "backoff=true");
  apply_override(c, "llm_model=7");
  apply_override(c, "verbal_threshold=0.8");
  apply_override(c, "dataset = strategyqa");
  EXPECT_EQ(c.q, 0.5);
  EXPECT_TRUE(c.backoff);
  EXPECT_EQ(c.llm_model, "7");
  EXPECT_EQ(c.verbal_threshold, 0.8);
  EXPECT_EQ(c.dataset, "strategyqa");
  expect_error(ErrorCode::ConfigError, [&] { apply_override(c, "novalue"); });
  expect_error(ErrorCode::ConfigError, [&] { apply_override(c, "=1"); });
}

TEST(Config, RelativePathsResolveAgainstTheFile) {
  TempDir dir("config");
  std::filesystem::create_directories(dir.path() / "sub");
  std::ofstream(dir.path() / "sub" / "c.json") << R"({"data":"items.jsonl","corpus":"/abs/corpus.json"})";
  const auto c = load_config(dir.path() / "sub" / "c.json");
  EXPECT_EQ(c.data, (dir.path() / "sub" / "items.jsonl").string());
  EXPECT_EQ(c.corpus, "/abs/corpus.json");
  EXPECT_EQ(c.out_dir, "uala-out");
  expect_error(ErrorCode::IoError, [&] { load_config(dir.path() / "missing.json"); });
  std::ofstream(dir.path() / "bad.json") << "{";
  expect_error(ErrorCode::ConfigError, [&] { load_config(dir.path() / "bad.json"); });
}

TEST(Config, CrossFieldChecks) {
  RunConfig c;
  c.corpus = "c.json";
  expect_error(ErrorCode::ConfigError, [&] { check(c); });  // replay without a fixture
  c.replay = "r.jsonl";
  EXPECT_NO_THROW(check(c));
  c.workers = 0;
  expect_error(ErrorCode::ConfigError, [&] { check(c); });
  c.workers = 1;
  c.provider = "magic";
  expect_error(ErrorCode::ConfigError, [&] { check(c); });
  c.provider = "replay";
  c.tools = "tape";
  expect_error(ErrorCode::ConfigError, [&] { check(c); });
}

}  // namespace
}  // namespace uala::app
