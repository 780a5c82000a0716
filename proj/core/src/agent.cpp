// SPDX-License-Identifier: Apache-2.0
#include "uala/agent.hpp"

#include <array>
#include <map>

#include <fmt/format.h>

#include "uala/error.hpp"
#include "uala/normalize.hpp"
#include "uala/parallel.hpp"

namespace uala {

using nlohmann::json;

namespace {

constexpr std::array kModes{
    std::pair{AgentMode::Standard, "standard"}, std::pair{AgentMode::CoT, "cot"},
    std::pair{AgentMode::SelfConsistency, "sc"}, std::pair{AgentMode::ReAct, "react"},
    std::pair{AgentMode::ReActBackoff, "react-backoff"}, std::pair{AgentMode::UalaS, "uala-s"},
    std::pair{AgentMode::UalaM, "uala-m"},       std::pair{AgentMode::Verbal, "verbal"},
};

const std::vector<std::string>& base_stop() {
  static const std::vector<std::string> stop{"\nQuestion:"};
  return stop;
}

std::string one_line(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return trim(out);
}

std::string with_text(std::string label, std::string_view text) {
  if (!text.empty()) {
    label += ' ';
    label += text;
  }
  return label;
}

std::optional<std::string> answer_text(const std::optional<ScoredAnswer>& a) {
  return a ? std::optional<std::string>(a->text) : std::nullopt;
}

template <class Fn>
auto optional_extract(Fn&& fn) -> std::optional<decltype(fn())> {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::AnswerExtractionFailure) throw;
    return std::nullopt;
  }
}

}  // namespace

std::string_view to_string(AgentMode m) noexcept {
  for (const auto& [mode, name] : kModes) {
    if (mode == m) return name;
  }
  return "unknown";
}

AgentMode agent_mode_from_string(std::string_view name) {
  for (const auto& [mode, n] : kModes) {
    if (n == name) return mode;
  }
  throw Error(ErrorCode::ConfigError, fmt::format("unknown mode '{}'", name));
}

PromptKind default_base_mode(Dataset d) noexcept {
  return d == Dataset::HotpotQA ? PromptKind::CoT : PromptKind::Standard;
}

ToolGrammar default_grammar(Dataset d) noexcept {
  return d == Dataset::MMLU ? ToolGrammar::Web : ToolGrammar::Wikipedia;
}

void validate(const AgentConfig& c) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); };
  if (c.base_mode != PromptKind::Standard && c.base_mode != PromptKind::CoT) {
    fail("base prompt mode must be standard or cot");
  }
  if (c.max_steps == 0) fail("max_steps must be at least 1");
  if (c.k == 0) fail("k must be at least 1");
  if (c.temperature <= 0.0) fail("sampling temperature must be positive");
  if ((c.grammar == ToolGrammar::Web) != (c.dataset == Dataset::MMLU)) {
    fail(fmt::format("tool grammar {} does not fit dataset {}", to_string(c.grammar), to_string(c.dataset)));
  }
  switch (c.mode) {
    case AgentMode::UalaS:
    case AgentMode::UalaM: {
      if (!c.profile) fail(fmt::format("mode {} needs a calibration profile", to_string(c.mode)));
      const Method m = c.profile->estimator.method;
      if (c.mode == AgentMode::UalaM && m != Method::MultiInference) {
        fail("uala-m needs a multi-inference calibration profile");
      }
      if (c.mode == AgentMode::UalaS && (m == Method::MultiInference || m == Method::VerbalComplement)) {
        fail("uala-s needs a single-inference calibration profile");
      }
      break;
    }
    case AgentMode::Verbal:
      if (!c.verbal_threshold || !(*c.verbal_threshold > 0.0 && *c.verbal_threshold < 1.0)) {
        fail("verbal mode needs a confidence threshold in (0, 1)");
      }
      if (c.oracle != OracleMode::Off) fail("verbal mode does not support an oracle");
      break;
    default:
      if (c.oracle != OracleMode::Off) fail(fmt::format("mode {} does not use an oracle", to_string(c.mode)));
      break;
  }
}

std::string majority_vote(Dataset d, std::span<const std::optional<std::string>> samples) {
  struct Class {
    std::size_t count = 0;
    std::size_t first = 0;
  };
  std::map<std::string, Class> classes;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i]) continue;
    auto [it, fresh] = classes.try_emplace(comparison_key(d, *samples[i]), Class{0, i});
    ++it->second.count;
  }
  if (classes.empty()) throw Error(ErrorCode::AnswerExtractionFailure, "no sample yielded an answer");
  const Class* best = nullptr;
  for (const auto& [_, c] : classes) {
    if (!best || c.count > best->count || (c.count == best->count && c.first < best->first)) best = &c;
  }
  return *samples[best->first];
}

ScoredAnswer extract_verbal_answer(const Completion& c) {
  ScoredAnswer a = extract_marked_answer(c);
  const auto open = a.text.rfind('[');
  if (open != std::string::npos && a.text.back() == ']') {
    try {
      parse_verbal_confidence(std::string_view(a.text).substr(open));
      a.text = trim(std::string_view(a.text).substr(0, open));
      a.tokens.clear();
      a.token_logprobs.clear();
    } catch (const Error&) {
      // Not a probability bracket; part of the answer.
    }
  }
  if (a.text.empty()) throw Error(ErrorCode::AnswerExtractionFailure, "verbal answer is empty");
  return a;
}

Agent::Agent(LlmGateway& llm, ToolEnvironment& tools, const PromptLibrary& prompts, AgentConfig config,
             OracleQueue* queue)
    : llm_(llm), tools_(tools), prompts_(prompts), config_(std::move(config)), queue_(queue) {
  validate(config_);
  if (config_.oracle == OracleMode::Interactive && !queue_) {
    throw Error(ErrorCode::ConfigError, "interactive oracle needs an escalation queue");
  }
}

BaseOutcome Agent::run_base(const QAItem& item, PromptKind kind) {
  BaseOutcome out;
  out.prompt = build_prompt(prompts_.get(config_.dataset, kind), item);
  CompletionRequest req;
  req.prompt = out.prompt;
  req.max_tokens = config_.max_tokens;
  req.stop = base_stop();
  out.completion = llm_.complete(req, UsageStage::Base);
  out.answer = optional_extract([&] {
    return kind == PromptKind::Verbal ? extract_verbal_answer(out.completion) : extract_marked_answer(out.completion);
  });
  return out;
}

template <class Extract>
Agent::Sampled Agent::resample(CompletionRequest req, Extract&& extract) {
  req.temperature = config_.temperature;
  req.n_samples = config_.k;
  Sampled s;
  for (const Completion& c : llm_.sample_batch(req, UsageStage::Sampling)) {
    s.output_tokens += c.output_token_count();
    s.answers.push_back(extract(c));
  }
  return s;
}

SelfConsistencyOutcome Agent::run_self_consistency(const QAItem& item) {
  CompletionRequest req;
  req.prompt = build_prompt(prompts_.get(config_.dataset, PromptKind::CoT), item);
  req.max_tokens = config_.max_tokens;
  req.stop = base_stop();
  Sampled s = resample(req, [](const Completion& c) {
    return answer_text(optional_extract([&] { return extract_marked_answer(c); }));
  });
  SelfConsistencyOutcome out;
  out.samples = std::move(s.answers);
  out.output_tokens = s.output_tokens;
  out.answer = optional_extract([&] { return majority_vote(config_.dataset, out.samples); });
  return out;
}

ReactOutcome Agent::run_react(const QAItem& item) {
  const ToolGrammar g = config_.grammar;
  const std::string base = build_prompt(prompts_.get(config_.dataset, PromptKind::ReAct), item);
  ToolSession session(tools_, g);
  ReactOutcome out;
  std::string scratch;

  auto generate = [&](CompletionRequest req) {
    req.max_tokens = config_.max_tokens;
    Completion c = llm_.complete(req, UsageStage::ToolLoop);
    out.output_tokens += c.output_token_count();
    return std::pair{std::move(req), std::move(c)};
  };
  auto try_parse = [&](const std::optional<std::string>& line) -> std::optional<ToolAction> {
    if (!line) return std::nullopt;
    try {
      return parse_action(*line, g);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::MalformedAction) throw;
      return std::nullopt;
    }
  };

  for (std::size_t i = 1; i <= config_.max_steps; ++i) {
    const std::string thought_label = step_label("Thought", g, i);
    const std::string action_label = step_label("Action", g, i);
    const std::string obs_label = step_label("Observation", g, i);

    CompletionRequest req;
    req.prompt = base + scratch + thought_label;
    req.stop = react_stop();
    auto [used, completion] = generate(std::move(req));
    const ReactGeneration gen = split_react_generation(completion.text);

    TrajectoryStep step;
    step.stage = Stage::ToolLoop;
    step.thought = gen.thought;
    step.action_text = gen.action_line;
    std::optional<ToolAction> action = try_parse(gen.action_line);
    const std::string thought_line = with_text(thought_label, one_line(gen.thought)) + "\n";

    if (!action) {
      CompletionRequest again;
      again.prompt = base + scratch + thought_line + action_label;
      again.stop = {"\n"};
      auto [used2, completion2] = generate(std::move(again));
      const std::string line = trim(completion2.text);
      step.action_text = line;
      step.note = "reprompted";
      action = try_parse(line);
      if (action) {
        used = std::move(used2);
        completion = std::move(completion2);
      }
    }

    if (!action) {
      const std::string raw = step.action_text.value_or("");
      step.observation = Observation{fmt::format("Invalid action: {}", raw), ObservationSource::NoResult, false};
      step.note = "invalid-action";
      scratch += thought_line + with_text(action_label, raw) + "\n" +
                 with_text(obs_label, step.observation->text) + "\n";
      out.steps.push_back(std::move(step));
      continue;
    }

    step.action = *action;
    if (action->kind == ActionKind::Finish) {
      out.finished = true;
      out.finish_request = used;
      out.answer = extract_finish_answer(completion);
      step.answer = answer_text(out.answer);
      out.steps.push_back(std::move(step));
      break;
    }

    Observation obs;
    for (int attempt = 0;; ++attempt) {
      try {
        obs = session.execute(*action);
        break;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::NoPageContext) {
          obs = Observation{"No page is loaded. Search for an entity before Lookup.", ObservationSource::NoResult,
                            false};
          step.note = "no-page-context";
          break;
        }
        if (e.code() != ErrorCode::ToolTransportError) throw;
        if (attempt == 1) {
          obs = Observation{fmt::format("Tool error: {}", e.what()), ObservationSource::NoResult, false};
          step.note = "tool-error";
          break;
        }
      }
    }
    obs.text = one_line(obs.text);
    scratch += thought_line + with_text(action_label, render_action(*action, g)) + "\n" + with_text(obs_label, obs.text) +
               "\n";
    step.observation = std::move(obs);
    out.steps.push_back(std::move(step));
  }
  out.tool_calls = session.calls();
  return out;
}

std::optional<Uncertainty> Agent::score(const ScoredAnswer& a, const std::optional<Sampled>& samples) const {
  try {
    if (samples) {
      return estimate_multi_inference(a.text, samples->answers,
                                      [d = config_.dataset](std::string_view s) { return comparison_key(d, s); });
    }
    return score_single_inference(a, config_.profile->estimator);
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::EmptySequence:
      case ErrorCode::InvalidLogprob:
      case ErrorCode::EmptySamples:
        return std::nullopt;
      default:
        throw;
    }
  }
}

BaseAttempt Agent::calibration_attempt(const QAItem& item, PromptKind kind, bool with_samples) {
  BaseAttempt attempt;
  BaseOutcome base = run_base(item, kind);
  attempt.answer = std::move(base.answer);
  if (with_samples && attempt.answer) {
    CompletionRequest req;
    req.prompt = base.prompt;
    req.max_tokens = config_.max_tokens;
    req.stop = base_stop();
    attempt.samples = resample(req, [](const Completion& c) {
                        return answer_text(optional_extract([&] { return extract_marked_answer(c); }));
                      }).answers;
  }
  return attempt;
}

EpisodeRecord Agent::run_episode(const QAItem& item) {
  EpisodeRecord rec = (config_.mode == AgentMode::UalaS || config_.mode == AgentMode::UalaM ||
                       config_.mode == AgentMode::Verbal)
                          ? routed_episode(item)
                          : baseline_episode(item);
  rec.em_correct = answers_match(config_.dataset, rec.final_answer, rec.gold);
  return rec;
}

EpisodeRecord Agent::baseline_episode(const QAItem& item) {
  EpisodeRecord rec;
  rec.id = item.id;
  rec.question = item.question;
  rec.gold = item.gold;
  rec.dataset = config_.dataset;
  rec.method = std::string(to_string(config_.mode));

  auto take_base = [&](PromptKind kind, AnswerSource source) {
    BaseOutcome b = run_base(item, kind);
    rec.output_tokens += b.completion.output_token_count();
    rec.base_answer = answer_text(b.answer);
    rec.steps.push_back({Stage::Base, b.completion.text, {}, {}, {}, rec.base_answer, std::string(to_string(kind))});
    if (b.answer) {
      rec.final_answer = b.answer->text;
      rec.answer_source = source;
    }
  };

  switch (config_.mode) {
    case AgentMode::Standard:
      take_base(PromptKind::Standard, AnswerSource::Base);
      break;
    case AgentMode::CoT:
      take_base(PromptKind::CoT, AnswerSource::Base);
      break;
    case AgentMode::SelfConsistency: {
      SelfConsistencyOutcome sc = run_self_consistency(item);
      rec.output_tokens += sc.output_tokens;
      rec.base_answer = sc.answer;
      rec.steps.push_back({Stage::Base, {}, {}, {}, {}, sc.answer, fmt::format("self-consistency k={}", config_.k)});
      if (sc.answer) {
        rec.final_answer = sc.answer;
        rec.answer_source = AnswerSource::Base;
      }
      break;
    }
    case AgentMode::ReAct:
    case AgentMode::ReActBackoff: {
      ReactOutcome r = run_react(item);
      rec.output_tokens += r.output_tokens;
      rec.tool_calls = r.tool_calls;
      rec.tool_answer = answer_text(r.answer);
      rec.steps = std::move(r.steps);
      if (r.answer) {
        rec.final_answer = r.answer->text;
        rec.answer_source = AnswerSource::Tool;
      } else if (config_.mode == AgentMode::ReActBackoff) {
        take_base(config_.base_mode, AnswerSource::Backoff);
      }
      break;
    }
    default:
      throw Error(ErrorCode::ConfigError, "not a baseline mode");
  }
  return rec;
}

EpisodeRecord Agent::routed_episode(const QAItem& item) {
  EpisodeRecord rec;
  rec.id = item.id;
  rec.question = item.question;
  rec.gold = item.gold;
  rec.dataset = config_.dataset;
  rec.method = std::string(to_string(config_.mode));
  if (config_.backoff) rec.method += "+backoff";
  if (config_.oracle != OracleMode::Off) rec.method += "+oracle";

  const bool verbal = config_.mode == AgentMode::Verbal;
  const bool multi = config_.mode == AgentMode::UalaM;
  const double tau = verbal ? 1.0 - *config_.verbal_threshold : config_.profile->tau;

  // Stage 1: base attempt.
  const PromptKind kind = verbal ? PromptKind::Verbal : config_.base_mode;
  BaseOutcome base = run_base(item, kind);
  rec.output_tokens += base.completion.output_token_count();
  rec.base_answer = answer_text(base.answer);
  Outcome first = Outcome::Escalate;
  if (verbal) {
    rec.base_uncertainty = verbal_uncertainty(base.completion.text);
    double confidence = 0.0;
    try {
      confidence = parse_verbal_confidence(base.completion.text);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnparsableConfidence) throw;
    }
    first = base.answer && !(confidence < *config_.verbal_threshold) ? Outcome::Accept : Outcome::Escalate;
  } else if (base.answer) {
    std::optional<Sampled> samples;
    if (multi) {
      CompletionRequest req;
      req.prompt = base.prompt;
      req.max_tokens = config_.max_tokens;
      req.stop = base_stop();
      samples = resample(req, [](const Completion& c) {
        return answer_text(optional_extract([&] { return extract_marked_answer(c); }));
      });
      rec.output_tokens += samples->output_tokens;
    }
    rec.base_uncertainty = score(*base.answer, samples);
    first = route(rec.base_uncertainty, tau);
  }
  rec.decisions.push_back({Stage::Base, rec.base_uncertainty, tau, first});
  rec.steps.push_back({Stage::Base, base.completion.text, {}, {}, {}, rec.base_answer, std::string(to_string(kind))});
  if (first == Outcome::Accept) {
    rec.final_answer = rec.base_answer;
    rec.answer_source = AnswerSource::Base;
    return rec;
  }

  // Stage 2: tool activation.
  ReactOutcome tool = run_react(item);
  rec.output_tokens += tool.output_tokens;
  rec.tool_calls = tool.tool_calls;
  rec.tool_answer = answer_text(tool.answer);
  for (auto& s : tool.steps) rec.steps.push_back(std::move(s));
  if (verbal) {
    // Verbal routing gates the base attempt only; the tool answer is kept.
    if (tool.answer) {
      rec.final_answer = rec.tool_answer;
      rec.answer_source = AnswerSource::Tool;
    } else if (config_.backoff && rec.base_answer) {
      rec.final_answer = rec.base_answer;
      rec.answer_source = AnswerSource::Backoff;
    }
    return rec;
  }
  Outcome second = Outcome::Escalate;
  if (tool.answer) {
    std::optional<Sampled> samples;
    if (multi) {
      samples = resample(*tool.finish_request, [](const Completion& c) -> std::optional<std::string> {
        try {
          return answer_text(extract_finish_answer(c));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::AnswerExtractionFailure) throw;
          return std::nullopt;
        }
      });
      rec.output_tokens += samples->output_tokens;
    }
    rec.tool_uncertainty = score(*tool.answer, samples);
    second = route(rec.tool_uncertainty, tau);
  }
  rec.decisions.push_back({Stage::ToolLoop, rec.tool_uncertainty, tau, second});
  if (second == Outcome::Accept) {
    rec.final_answer = rec.tool_answer;
    rec.answer_source = AnswerSource::Tool;
    return rec;
  }

  // Stage 3: oracle, or whatever the tool stage left.
  resolve_after_tool(rec, item, tau);
  return rec;
}

void Agent::resolve_after_tool(EpisodeRecord& rec, const QAItem& item, double tau) {
  auto fall_back = [&] {
    if (rec.tool_answer) {
      rec.final_answer = rec.tool_answer;
      rec.answer_source = AnswerSource::Tool;
    } else if (config_.backoff && rec.base_answer) {
      rec.final_answer = rec.base_answer;
      rec.answer_source = AnswerSource::Backoff;
    }
  };

  switch (config_.oracle) {
    case OracleMode::Off:
      fall_back();
      return;
    case OracleMode::Simulated: {
      if (trim(item.gold).empty()) {
        throw Error(ErrorCode::ConfigError, fmt::format("simulated oracle needs a gold answer for '{}'", item.id));
      }
      rec.oracle = OracleEvent{OracleMode::Simulated, true, false, item.gold};
      rec.steps.push_back({Stage::Oracle, {}, {}, {}, {}, item.gold, "simulated"});
      rec.final_answer = item.gold;
      rec.answer_source = AnswerSource::Oracle;
      return;
    }
    case OracleMode::Interactive: {
      json trajectory = json::array();
      for (const auto& s : rec.steps) trajectory.push_back(step_to_json(s));
      json payload = {{"episode_id", rec.id},
                      {"question", rec.question},
                      {"base_answer", rec.base_answer ? json(*rec.base_answer) : json(nullptr)},
                      {"base_uncertainty", uncertainty_to_json(rec.base_uncertainty)},
                      {"tool_answer", rec.tool_answer ? json(*rec.tool_answer) : json(nullptr)},
                      {"tool_uncertainty", uncertainty_to_json(rec.tool_uncertainty)},
                      {"tau", tau},
                      {"trajectory", std::move(trajectory)}};
      queue_->enqueue(rec.id, std::move(payload));
      const std::optional<std::string> answer = queue_->wait(rec.id, config_.oracle_timeout);
      if (answer) {
        rec.oracle = OracleEvent{OracleMode::Interactive, true, false, answer};
        rec.steps.push_back({Stage::Oracle, {}, {}, {}, {}, answer, "interactive"});
        rec.final_answer = answer;
        rec.answer_source = AnswerSource::Oracle;
      } else {
        rec.oracle = OracleEvent{OracleMode::Interactive, false, true, std::nullopt};
        rec.steps.push_back({Stage::Oracle, {}, {}, {}, {}, std::nullopt, "timeout"});
        fall_back();
      }
      return;
    }
  }
}

std::vector<EpisodeRecord> run_episodes(Agent& agent, std::span<const QAItem> items, std::size_t workers,
                                        RunProgress* progress) {
  std::vector<EpisodeRecord> out(items.size());
  parallel_for(items.size(), workers, [&](std::size_t i) {
    out[i] = agent.run_episode(items[i]);
    if (progress) {
      if (out[i].decisions.size() == 2 && out[i].decisions[1].outcome == Outcome::Escalate) ++progress->escalated;
      if (out[i].em_correct) ++progress->correct;
      ++progress->completed;
    }
  });
  return out;
}

}  // namespace uala
