// SPDX-License-Identifier: Apache-2.0
#include "uala/records.hpp"

#include <array>

#include <fmt/format.h>

#include "uala/canonical_json.hpp"
#include "uala/error.hpp"

namespace uala {

using nlohmann::json;

namespace {

template <class E, std::size_t N>
E parse_enum(std::string_view s, const std::array<E, N>& all, std::string_view what) {
  for (E e : all) {
    if (to_string(e) == s) return e;
  }
  throw Error(ErrorCode::ConfigError, fmt::format("unknown {} '{}'", what, s));
}

json opt_string(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

std::optional<std::string> get_opt_string(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<std::string>();
}

ObservationSource observation_source_from_string(std::string_view s) {
  constexpr std::array all{ObservationSource::WikiPage,   ObservationSource::WikiSuggestions,
                           ObservationSource::WikiLookup, ObservationSource::WebSnippet,
                           ObservationSource::Mock,       ObservationSource::NoResult,
                           ObservationSource::EmptySnippet};
  return parse_enum(s, all, "observation source");
}

ActionKind action_kind_from_string(std::string_view s) {
  constexpr std::array all{ActionKind::Search, ActionKind::Lookup, ActionKind::WebSearch, ActionKind::Finish};
  return parse_enum(s, all, "action kind");
}

}  // namespace

std::string_view to_string(Stage s) noexcept {
  switch (s) {
    case Stage::Base: return "base";
    case Stage::ToolLoop: return "tool-loop";
    case Stage::Oracle: return "oracle";
  }
  return "unknown";
}

std::string_view to_string(Outcome o) noexcept { return o == Outcome::Accept ? "accept" : "escalate"; }

std::string_view to_string(AnswerSource s) noexcept {
  switch (s) {
    case AnswerSource::Base: return "base";
    case AnswerSource::Tool: return "tool";
    case AnswerSource::Backoff: return "backoff";
    case AnswerSource::Oracle: return "oracle";
  }
  return "unknown";
}

std::string_view to_string(OracleMode m) noexcept {
  switch (m) {
    case OracleMode::Off: return "off";
    case OracleMode::Simulated: return "simulated";
    case OracleMode::Interactive: return "interactive";
  }
  return "unknown";
}

Stage stage_from_string(std::string_view s) {
  return parse_enum(s, std::array{Stage::Base, Stage::ToolLoop, Stage::Oracle}, "stage");
}

Outcome outcome_from_string(std::string_view s) {
  return parse_enum(s, std::array{Outcome::Accept, Outcome::Escalate}, "outcome");
}

AnswerSource answer_source_from_string(std::string_view s) {
  return parse_enum(s, std::array{AnswerSource::Base, AnswerSource::Tool, AnswerSource::Backoff, AnswerSource::Oracle},
                    "answer source");
}

OracleMode oracle_mode_from_string(std::string_view s) {
  return parse_enum(s, std::array{OracleMode::Off, OracleMode::Simulated, OracleMode::Interactive}, "oracle mode");
}

json uncertainty_to_json(const std::optional<Uncertainty>& u) {
  if (!u) return nullptr;
  return {{"value", u->value}, {"method", std::string(to_string(u->method))}};
}

std::optional<Uncertainty> uncertainty_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return Uncertainty{j.at("value").get<double>(), method_from_string(j.at("method").get<std::string>())};
}

json step_to_json(const TrajectoryStep& s) {
  json j = {{"stage", std::string(to_string(s.stage))},
            {"thought", opt_string(s.thought)},
            {"action_text", opt_string(s.action_text)},
            {"answer", opt_string(s.answer)},
            {"note", s.note}};
  j["action"] = s.action ? json{{"kind", std::string(to_string(s.action->kind))}, {"argument", s.action->argument}}
                         : json(nullptr);
  j["observation"] = s.observation ? json{{"text", s.observation->text},
                                          {"source", std::string(to_string(s.observation->source))},
                                          {"call_counted", s.observation->call_counted}}
                                   : json(nullptr);
  return j;
}

TrajectoryStep step_from_json(const json& j) {
  TrajectoryStep s;
  s.stage = stage_from_string(j.at("stage").get<std::string>());
  s.thought = get_opt_string(j, "thought");
  s.action_text = get_opt_string(j, "action_text");
  s.answer = get_opt_string(j, "answer");
  s.note = j.value("note", std::string());
  if (j.contains("action") && !j["action"].is_null()) {
    s.action = ToolAction{action_kind_from_string(j["action"].at("kind").get<std::string>()),
                          j["action"].at("argument").get<std::string>()};
  }
  if (j.contains("observation") && !j["observation"].is_null()) {
    const json& o = j["observation"];
    s.observation = Observation{o.at("text").get<std::string>(),
                                observation_source_from_string(o.at("source").get<std::string>()),
                                o.value("call_counted", false)};
  }
  return s;
}

json decision_to_json(const RoutingDecision& d) {
  return {{"stage", std::string(to_string(d.stage))},
          {"uncertainty", uncertainty_to_json(d.uncertainty)},
          {"tau", d.tau},
          {"outcome", std::string(to_string(d.outcome))}};
}

RoutingDecision decision_from_json(const json& j) {
  return {stage_from_string(j.at("stage").get<std::string>()), uncertainty_from_json(j.at("uncertainty")),
          j.at("tau").get<double>(), outcome_from_string(j.at("outcome").get<std::string>())};
}

namespace {

json episode_summary(const EpisodeRecord& e) {
  json decisions = json::array();
  for (const auto& d : e.decisions) decisions.push_back(decision_to_json(d));
  json j = {{"id", e.id},
            {"question", e.question},
            {"gold", e.gold},
            {"dataset", std::string(to_string(e.dataset))},
            {"method", e.method},
            {"base_answer", opt_string(e.base_answer)},
            {"base_uncertainty", uncertainty_to_json(e.base_uncertainty)},
            {"tool_answer", opt_string(e.tool_answer)},
            {"tool_uncertainty", uncertainty_to_json(e.tool_uncertainty)},
            {"final_answer", opt_string(e.final_answer)},
            {"decisions", std::move(decisions)},
            {"tool_calls", e.tool_calls},
            {"output_tokens", e.output_tokens},
            {"em_correct", e.em_correct}};
  j["answer_source"] = e.answer_source ? json(std::string(to_string(*e.answer_source))) : json(nullptr);
  j["oracle"] = e.oracle ? json{{"mode", std::string(to_string(e.oracle->mode))},
                                {"answered", e.oracle->answered},
                                {"timed_out", e.oracle->timed_out},
                                {"answer", opt_string(e.oracle->answer)}}
                         : json(nullptr);
  return j;
}

EpisodeRecord episode_from_summary(const json& j) {
  EpisodeRecord e;
  e.id = j.at("id").get<std::string>();
  e.question = j.at("question").get<std::string>();
  e.gold = j.at("gold").get<std::string>();
  e.dataset = dataset_from_string(j.at("dataset").get<std::string>());
  e.method = j.value("method", std::string());
  e.base_answer = get_opt_string(j, "base_answer");
  e.base_uncertainty = uncertainty_from_json(j.at("base_uncertainty"));
  e.tool_answer = get_opt_string(j, "tool_answer");
  e.tool_uncertainty = uncertainty_from_json(j.at("tool_uncertainty"));
  e.final_answer = get_opt_string(j, "final_answer");
  if (!j.at("answer_source").is_null()) {
    e.answer_source = answer_source_from_string(j["answer_source"].get<std::string>());
  }
  for (const auto& d : j.at("decisions")) e.decisions.push_back(decision_from_json(d));
  e.tool_calls = j.at("tool_calls").get<std::size_t>();
  e.output_tokens = j.at("output_tokens").get<std::size_t>();
  e.em_correct = j.at("em_correct").get<bool>();
  if (j.contains("oracle") && !j["oracle"].is_null()) {
    const json& o = j["oracle"];
    e.oracle = OracleEvent{oracle_mode_from_string(o.at("mode").get<std::string>()), o.value("answered", false),
                           o.value("timed_out", false), get_opt_string(o, "answer")};
  }
  return e;
}

}  // namespace

json episode_to_json(const EpisodeRecord& e) {
  json j = episode_summary(e);
  json steps = json::array();
  for (const auto& s : e.steps) steps.push_back(step_to_json(s));
  j["steps"] = std::move(steps);
  return j;
}

EpisodeRecord episode_from_json(const json& j) {
  try {
    EpisodeRecord e = episode_from_summary(j);
    if (j.contains("steps")) {
      for (const auto& s : j["steps"]) e.steps.push_back(step_from_json(s));
    }
    return e;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ConfigError, fmt::format("malformed episode record: {}", ex.what()));
  }
}

std::vector<json> log_records(const json& config, const std::vector<EpisodeRecord>& episodes) {
  std::vector<json> out;
  out.push_back({{"schema", kTrajectorySchema}, {"type", "run"}, {"config", config}});
  for (const auto& e : episodes) {
    for (std::size_t i = 0; i < e.steps.size(); ++i) {
      json s = step_to_json(e.steps[i]);
      s["schema"] = kTrajectorySchema;
      s["type"] = "step";
      s["episode_id"] = e.id;
      s["index"] = i;
      out.push_back(std::move(s));
    }
    json summary = episode_summary(e);
    summary["schema"] = kTrajectorySchema;
    summary["type"] = "episode";
    summary["n_steps"] = e.steps.size();
    out.push_back(std::move(summary));
  }
  return out;
}

void write_trajectory_log(const std::filesystem::path& path, const json& config,
                          const std::vector<EpisodeRecord>& episodes) {
  write_jsonl(path, log_records(config, episodes));
}

std::vector<EpisodeRecord> read_trajectory_log(const std::filesystem::path& path) {
  std::vector<EpisodeRecord> out;
  std::vector<TrajectoryStep> pending;
  for (const auto& rec : read_jsonl(path)) {
    try {
      if (rec.value("schema", std::string()) != kTrajectorySchema) {
        throw Error(ErrorCode::ConfigError, fmt::format("{}: unsupported log schema", path.string()));
      }
      const std::string type = rec.at("type").get<std::string>();
      if (type == "step") {
        pending.push_back(step_from_json(rec));
      } else if (type == "episode") {
        EpisodeRecord e = episode_from_summary(rec);
        e.steps = std::move(pending);
        pending.clear();
        out.push_back(std::move(e));
      }
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::ConfigError, fmt::format("{}: {}", path.string(), ex.what()));
    }
  }
  return out;
}

}  // namespace uala
