// SPDX-License-Identifier: Apache-2.0
#include <fstream>

#include <gtest/gtest.h>

#include "support/test_util.hpp"
#include "uala/report.hpp"

namespace uala {
namespace {

using testing::expect_error;
using testing::TempDir;

EpisodeRecord sample_episode(std::string id, AnswerSource src, bool correct) {
  EpisodeRecord e;
  e.id = std::move(id);
  e.question = "Who?";
  e.gold = "Nixon";
  e.method = "uala-s";
  e.base_answer = "Ford";
  e.base_uncertainty = Uncertainty{0.9, Method::Entropy};
  e.decisions.push_back({Stage::Base, e.base_uncertainty, 0.5, Outcome::Escalate});
  TrajectoryStep base;
  base.stage = Stage::Base;
  base.thought = "Ford was president.";
  base.answer = "Ford";
  e.steps.push_back(base);
  TrajectoryStep search;
  search.stage = Stage::ToolLoop;
  search.thought = "Search Milhouse.";
  search.action = ToolAction{ActionKind::Search, "Milhouse"};
  search.action_text = "Search[Milhouse]";
  search.observation = Observation{"Milhouse was named after Nixon.", ObservationSource::WikiPage, true};
  e.steps.push_back(search);
  e.tool_answer = "Nixon";
  e.tool_uncertainty = std::nullopt;
  e.decisions.push_back({Stage::ToolLoop, std::nullopt, 0.5, Outcome::Escalate});
  e.final_answer = correct ? "Nixon" : "Ford";
  e.answer_source = src;
  e.tool_calls = 1;
  e.output_tokens = 40;
  e.em_correct = correct;
  e.oracle = OracleEvent{OracleMode::Simulated, true, false, "Nixon"};
  return e;
}

TEST(Routing, BoundaryAndAbsent) {
  EXPECT_EQ(route(Uncertainty{0.5, Method::Entropy}, 0.5), Outcome::Accept);
  EXPECT_EQ(route(Uncertainty{std::nextafter(0.5, 1.0), Method::Entropy}, 0.5), Outcome::Escalate);
  EXPECT_EQ(route(std::nullopt, 1e300), Outcome::Escalate);
}

TEST(Records, EpisodeJsonRoundTrip) {
  const auto e = sample_episode("e1", AnswerSource::Oracle, true);
  const auto j = episode_to_json(e);
  EXPECT_TRUE(j.at("tool_uncertainty").is_null());
  EXPECT_EQ(episode_to_json(episode_from_json(j)), j);
}

TEST(Records, EnumNamesRoundTrip) {
  for (Stage s : {Stage::Base, Stage::ToolLoop, Stage::Oracle}) EXPECT_EQ(stage_from_string(to_string(s)), s);
  for (AnswerSource s : {AnswerSource::Base, AnswerSource::Tool, AnswerSource::Backoff, AnswerSource::Oracle}) {
    EXPECT_EQ(answer_source_from_string(to_string(s)), s);
  }
  for (OracleMode m : {OracleMode::Off, OracleMode::Simulated, OracleMode::Interactive}) {
    EXPECT_EQ(oracle_mode_from_string(to_string(m)), m);
  }
  expect_error(ErrorCode::ConfigError, [] { stage_from_string("nope"); });
}

TEST(Records, LogLayoutAndReadBack) {
  TempDir dir("log");
  const std::vector<EpisodeRecord> eps{sample_episode("e1", AnswerSource::Oracle, true),
                                       sample_episode("e2", AnswerSource::Tool, false)};
  const nlohmann::json config = {{"mode", "uala-s"}};
  const auto lines = log_records(config, eps);
  ASSERT_EQ(lines.size(), 1u + 2u * 3u);
  EXPECT_EQ(lines[0]["type"], "run");
  EXPECT_EQ(lines[1]["type"], "step");
  EXPECT_EQ(lines[3]["type"], "episode");
  for (const auto& l : lines) EXPECT_EQ(l["schema"], kTrajectorySchema);

  write_trajectory_log(dir.path() / "t.jsonl", config, eps);
  const auto back = read_trajectory_log(dir.path() / "t.jsonl");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < eps.size(); ++i) EXPECT_EQ(episode_to_json(back[i]), episode_to_json(eps[i]));

  std::ofstream(dir.path() / "bad.jsonl") << R"({"schema":"other/9","type":"run"})" << "\n";
  expect_error(ErrorCode::ConfigError, [&] { read_trajectory_log(dir.path() / "bad.jsonl"); });
}

TEST(Report, EmRounding) {
  EXPECT_DOUBLE_EQ(em_percent(17, 20), 85.0);
  EXPECT_DOUBLE_EQ(em_percent(1, 3), 33.3);
  EXPECT_DOUBLE_EQ(em_percent(2, 3), 66.7);
  EXPECT_DOUBLE_EQ(em_percent(1, 16), 6.3);
  EXPECT_DOUBLE_EQ(em_percent(0, 0), 0.0);
}

TEST(Report, AggregatesCostsAndSources) {
  auto none = sample_episode("e3", AnswerSource::Tool, false);
  none.final_answer.reset();
  none.answer_source.reset();
  none.decisions.front().outcome = Outcome::Accept;
  const std::vector<EpisodeRecord> eps{sample_episode("e1", AnswerSource::Oracle, true),
                                       sample_episode("e2", AnswerSource::Tool, false), none};
  const auto r = aggregate(eps);
  EXPECT_EQ(r.n_items, 3u);
  EXPECT_EQ(r.correct, 1u);
  EXPECT_DOUBLE_EQ(r.em, 33.3);
  EXPECT_EQ(r.tool_calls, 3u);
  EXPECT_EQ(r.output_tokens, 120u);
  EXPECT_EQ(r.base_escalations, 2u);
  EXPECT_EQ(r.by_source[static_cast<std::size_t>(AnswerSource::Oracle)], 1u);
  EXPECT_EQ(r.by_source[static_cast<std::size_t>(AnswerSource::Tool)], 1u);
  EXPECT_EQ(r.no_answer, 1u);

  const auto j = report_to_json(r);
  EXPECT_EQ(j["by_source"]["none"], 1);
  EXPECT_TRUE(j["items"][2]["final_answer"].is_null());
  const auto text = report_to_text(r);
  EXPECT_NE(text.find("uala-s"), std::string::npos);
  EXPECT_NE(text.find("33.3"), std::string::npos);
  EXPECT_NE(text.find("oracle 1, none 1"), std::string::npos);

  expect_error(ErrorCode::InsufficientData, [] { aggregate(std::span<const EpisodeRecord>{}); });
}

}  // namespace
}  // namespace uala
