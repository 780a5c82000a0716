// SPDX-License-Identifier: Apache-2.0
#include "uala/script_book.hpp"

#include <cctype>

#include <fmt/format.h>

#include "uala/canonical_json.hpp"
#include "uala/error.hpp"
#include "uala/normalize.hpp"

namespace uala {

using nlohmann::json;

namespace {

constexpr double kDefaultLogprob = -0.05;

bool is_word(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || (c & 0x80) != 0; }

bool is_reprompt_tail(std::string_view tail) {
  const std::string t = trim(tail);
  if (t.rfind("Action", 0) != 0 || t.back() != ':') return false;
  for (std::size_t i = 6; i + 1 < t.size(); ++i) {
    if (t[i] != ' ' && !std::isdigit(static_cast<unsigned char>(t[i]))) return false;
  }
  return true;
}

std::string rule_key(std::string_view question, PromptKind kind, std::size_t step, std::size_t attempt, bool sampled,
                     std::optional<std::size_t> sample) {
  return canonical_dump({{"q", question},
                         {"k", std::string(to_string(kind))},
                         {"s", step},
                         {"a", attempt},
                         {"t", sampled},
                         {"i", sample ? json(*sample) : json(nullptr)}});
}

}  // namespace

PromptShape classify_prompt(const PromptLibrary& prompts, Dataset dataset, std::string_view prompt) {
  const auto kind = prompts.classify(dataset, prompt);
  if (!kind) throw Error(ErrorCode::ConfigError, "prompt does not start with a known template");
  PromptShape shape;
  shape.kind = *kind;
  const std::string& tmpl = prompts.get(dataset, *kind);
  const std::string_view rest = prompt.substr(tmpl.size());
  constexpr std::string_view kQuestion = "Question: ";
  const auto q = rest.find(kQuestion);
  if (q == std::string_view::npos) throw Error(ErrorCode::ConfigError, "prompt has no question line");
  const auto q_end = rest.find('\n', q);
  shape.question = std::string(rest.substr(q + kQuestion.size(), q_end - q - kQuestion.size()));
  if (*kind != PromptKind::ReAct) return shape;

  const std::string_view scratch = q_end == std::string_view::npos ? std::string_view{} : rest.substr(q_end + 1);
  shape.step = 1;
  for (std::size_t pos = 0; pos < scratch.size();) {
    std::size_t nl = scratch.find('\n', pos);
    if (nl == std::string_view::npos) nl = scratch.size();
    if (scratch.substr(pos, 11) == "Observation") ++shape.step;
    pos = nl + 1;
  }
  const auto last_nl = prompt.rfind('\n');
  const std::string_view tail = last_nl == std::string_view::npos ? prompt : prompt.substr(last_nl + 1);
  shape.attempt = is_reprompt_tail(tail) ? 1 : 0;
  return shape;
}

std::vector<std::string> simple_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    if (i < text.size() && text[i] == '\n') {
      if (i > start) out.emplace_back(text.substr(start, i - start));
      out.emplace_back("\n");
      ++i;
      continue;
    }
    if (i < text.size() && is_word(text[i])) {
      while (i < text.size() && is_word(text[i])) ++i;
    } else if (i < text.size()) {
      ++i;
    }
    out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

ScriptRule script_rule_from_json(const json& j) {
  try {
    ScriptRule r;
    r.question = j.at("question").get<std::string>();
    r.kind = prompt_kind_from_string(j.at("mode").get<std::string>());
    r.step = j.value("step", std::size_t{r.kind == PromptKind::ReAct ? 1u : 0u});
    r.attempt = j.value("attempt", std::size_t{0});
    r.sampled = j.value("sampled", false);
    if (j.contains("sample") && !j["sample"].is_null()) r.sample = j["sample"].get<std::size_t>();
    r.completion.text = j.at("text").get<std::string>();
    r.completion.tokens = j.contains("tokens") ? j["tokens"].get<std::vector<std::string>>()
                                               : simple_tokenize(r.completion.text);
    if (j.contains("token_logprobs")) {
      r.completion.token_logprobs = j["token_logprobs"].get<std::vector<double>>();
    } else {
      r.completion.token_logprobs.assign(r.completion.tokens.size(), j.value("logprob", kDefaultLogprob));
    }
    r.completion.finish_reason = finish_reason_from_string(j.value("finish_reason", std::string("stop")));
    if (r.completion.token_logprobs.size() != r.completion.tokens.size()) {
      throw Error(ErrorCode::ConfigError, fmt::format("script rule for '{}': tokens and logprobs differ in length",
                                                      r.question));
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, fmt::format("malformed script rule: {}", e.what()));
  }
}

json script_rule_to_json(const ScriptRule& r) {
  json j = completion_to_json(r.completion);
  j["question"] = r.question;
  j["mode"] = std::string(to_string(r.kind));
  j["step"] = r.step;
  j["attempt"] = r.attempt;
  j["sampled"] = r.sampled;
  j["sample"] = r.sample ? json(*r.sample) : json(nullptr);
  return j;
}

ScriptBook::ScriptBook(PromptLibrary prompts, Dataset dataset, std::vector<ScriptRule> rules)
    : prompts_(std::move(prompts)), dataset_(dataset), rules_(std::move(rules)) {
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const auto& r = rules_[i];
    const auto [_, inserted] =
        index_.emplace(rule_key(r.question, r.kind, r.step, r.attempt, r.sampled, r.sample), i);
    if (!inserted) {
      throw Error(ErrorCode::ConfigError,
                  fmt::format("duplicate script rule: '{}' {} step {}", r.question, to_string(r.kind), r.step));
    }
  }
}

ScriptBook ScriptBook::load(const std::filesystem::path& path, PromptLibrary prompts, Dataset dataset) {
  std::vector<ScriptRule> rules;
  for (const auto& rec : read_jsonl(path)) rules.push_back(script_rule_from_json(rec));
  return ScriptBook(std::move(prompts), dataset, std::move(rules));
}

std::optional<Completion> ScriptBook::find(const CompletionRequest& req, std::size_t sample_index) const {
  const PromptShape shape = classify_prompt(prompts_, dataset_, req.prompt);
  const bool sampled = req.temperature > 0.0;
  for (const std::optional<std::size_t> sample : {std::optional<std::size_t>(sample_index), std::optional<std::size_t>()}) {
    auto it = index_.find(rule_key(shape.question, shape.kind, shape.step, shape.attempt, sampled, sample));
    if (it != index_.end()) return rules_[it->second].completion;
  }
  return std::nullopt;
}

Completion ScriptBook::generate(const CompletionRequest& req, std::size_t sample_index) {
  if (auto c = find(req, sample_index)) return *c;
  const PromptShape shape = classify_prompt(prompts_, dataset_, req.prompt);
  throw FixtureMiss(fingerprint(req, sample_index),
                    fmt::format("script rule (question '{}', mode {}, step {}, attempt {}, sample {}{})",
                                shape.question, to_string(shape.kind), shape.step, shape.attempt, sample_index,
                                req.temperature > 0.0 ? ", sampled" : ""));
}

}  // namespace uala
