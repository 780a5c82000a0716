// SPDX-License-Identifier: Apache-2.0
#pragma once

// What an episode leaves behind: stage-tagged trajectory steps, routing
// decisions and the final record, plus the versioned JSONL log schema.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uala/dataset.hpp"
#include "uala/toolbelt.hpp"
#include "uala/uncertainty.hpp"

namespace uala {

inline constexpr const char* kTrajectorySchema = "uala.trajectory/1";

enum class Stage { Base, ToolLoop, Oracle };
enum class Outcome { Accept, Escalate };
enum class AnswerSource { Base, Tool, Backoff, Oracle };
enum class OracleMode { Off, Simulated, Interactive };

std::string_view to_string(Stage s) noexcept;
std::string_view to_string(Outcome o) noexcept;
std::string_view to_string(AnswerSource s) noexcept;
std::string_view to_string(OracleMode m) noexcept;
Stage stage_from_string(std::string_view s);
Outcome outcome_from_string(std::string_view s);
AnswerSource answer_source_from_string(std::string_view s);
OracleMode oracle_mode_from_string(std::string_view s);

/// Escalate iff u > tau; an unscorable (absent) uncertainty always escalates.
inline Outcome route(const std::optional<Uncertainty>& u, double tau) noexcept {
  return u && u->value <= tau ? Outcome::Accept : Outcome::Escalate;
}

struct TrajectoryStep {
  Stage stage = Stage::Base;
  std::optional<std::string> thought;
  std::optional<ToolAction> action;
  std::optional<std::string> action_text;  // raw line, kept for malformed actions
  std::optional<Observation> observation;
  std::optional<std::string> answer;       // answer produced at this step, if any
  std::string note;                        // e.g. "reprompted", "invalid-action"
};

struct RoutingDecision {
  Stage stage = Stage::Base;
  std::optional<Uncertainty> uncertainty;
  double tau = 0.0;
  Outcome outcome = Outcome::Escalate;
};

struct OracleEvent {
  OracleMode mode = OracleMode::Off;
  bool answered = false;
  bool timed_out = false;
  std::optional<std::string> answer;
};

struct EpisodeRecord {
  std::string id;
  std::string question;
  std::string gold;
  Dataset dataset = Dataset::HotpotQA;
  std::string method;

  std::optional<std::string> base_answer;
  std::optional<Uncertainty> base_uncertainty;
  std::optional<std::string> tool_answer;
  std::optional<Uncertainty> tool_uncertainty;

  std::optional<std::string> final_answer;
  std::optional<AnswerSource> answer_source;  // absent with the final answer
  std::vector<RoutingDecision> decisions;
  std::vector<TrajectoryStep> steps;
  std::size_t tool_calls = 0;
  std::size_t output_tokens = 0;
  bool em_correct = false;
  std::optional<OracleEvent> oracle;
};

nlohmann::json step_to_json(const TrajectoryStep& s);
TrajectoryStep step_from_json(const nlohmann::json& j);
nlohmann::json decision_to_json(const RoutingDecision& d);
RoutingDecision decision_from_json(const nlohmann::json& j);
nlohmann::json uncertainty_to_json(const std::optional<Uncertainty>& u);
std::optional<Uncertainty> uncertainty_from_json(const nlohmann::json& j);

/// Full record including steps.
nlohmann::json episode_to_json(const EpisodeRecord& e);
EpisodeRecord episode_from_json(const nlohmann::json& j);

/// Log lines: a "run" header carrying the effective config, then for every
/// episode (in item order) one "step" line per step and a terminal "episode"
/// line. No timestamps, so identical runs give identical bytes.
std::vector<nlohmann::json> log_records(const nlohmann::json& config, const std::vector<EpisodeRecord>& episodes);
void write_trajectory_log(const std::filesystem::path& path, const nlohmann::json& config,
                          const std::vector<EpisodeRecord>& episodes);

/// Reassembles episodes (with their steps) from a trajectory log.
std::vector<EpisodeRecord> read_trajectory_log(const std::filesystem::path& path);

}  // namespace uala
