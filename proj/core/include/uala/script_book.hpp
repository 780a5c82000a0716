// SPDX-License-Identifier: Apache-2.0
#pragma once

// Scripted LLM behaviour for offline runs. A prompt is classified into
// (question, prompt kind, ReAct step, reprompt attempt, sample) and answered
// by the matching rule; unmatched prompts are fixture misses.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uala/llm_gateway.hpp"
#include "uala/prompts.hpp"

namespace uala {

struct PromptShape {
  PromptKind kind = PromptKind::Standard;
  std::string question;     // text after "Question: " on the question line
  std::size_t step = 0;     // ReAct: observations so far + 1; 0 for base prompts
  std::size_t attempt = 0;  // 1 when the prompt ends in a bare "Action N:" reprompt
};

/// Throws ConfigError when the prompt was not built from a known template.
PromptShape classify_prompt(const PromptLibrary& prompts, Dataset dataset, std::string_view prompt);

/// Splits text into tokens that concatenate back to it: leading whitespace
/// stays attached to the following word or punctuation mark.
std::vector<std::string> simple_tokenize(std::string_view text);

struct ScriptRule {
  std::string question;
  PromptKind kind = PromptKind::Standard;
  std::size_t step = 0;
  std::size_t attempt = 0;
  bool sampled = false;               // matches temperature > 0 requests
  std::optional<std::size_t> sample;  // absent: any sample index
  Completion completion;
};

/// JSONL rules: {"question", "mode", "step", "attempt", "sampled", "sample",
/// "text", "tokens", "token_logprobs", "logprob", "finish_reason"}. Without
/// "tokens" the text is split by simple_tokenize; without "token_logprobs"
/// every token gets "logprob" (default -0.05).
ScriptRule script_rule_from_json(const nlohmann::json& j);
nlohmann::json script_rule_to_json(const ScriptRule& r);

class ScriptBook : public Provider {
 public:
  ScriptBook(PromptLibrary prompts, Dataset dataset, std::vector<ScriptRule> rules);
  static ScriptBook load(const std::filesystem::path& path, PromptLibrary prompts, Dataset dataset);

  Completion generate(const CompletionRequest& req, std::size_t sample_index) override;
  std::optional<Completion> find(const CompletionRequest& req, std::size_t sample_index) const;
  std::size_t size() const noexcept { return rules_.size(); }

 private:
  PromptLibrary prompts_;
  Dataset dataset_;
  std::vector<ScriptRule> rules_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace uala
