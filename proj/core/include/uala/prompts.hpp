// SPDX-License-Identifier: Apache-2.0
#pragma once

// Few-shot prompt files, prompt assembly for the base and ReAct modes, and
// extraction of the answer span (text plus its token logprobs) from a completion.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "uala/dataset.hpp"
#include "uala/llm_gateway.hpp"
#include "uala/toolbelt.hpp"
#include "uala/uncertainty.hpp"

namespace uala {

enum class PromptKind { Standard, CoT, ReAct, Verbal };

std::string_view to_string(PromptKind k) noexcept;
PromptKind prompt_kind_from_string(std::string_view name);

/// Directory compiled in as the installed prompt location; UALA_PROMPT_DIR overrides it.
std::filesystem::path default_prompt_dir();

/// Templates named <dataset>_<kind>.txt, e.g. hotpotqa_react.txt.
class PromptLibrary {
 public:
  static PromptLibrary load(const std::filesystem::path& dir);

  /// Throws ConfigError when the file for (dataset, kind) was not found.
  const std::string& get(Dataset d, PromptKind k) const;

  /// The template the prompt was built from, if any (longest prefix match).
  std::optional<PromptKind> classify(Dataset d, std::string_view prompt) const;

 private:
  std::map<std::pair<Dataset, PromptKind>, std::string> templates_;
};

/// "Question: ...\n" followed by "A. ...\n" lines for multiple choice.
std::string question_block(const QAItem& item);

/// Template, a blank line, then the question block.
std::string build_prompt(const std::string& tmpl, const QAItem& item);

/// "Thought 3:" for the numbered Wikipedia format, "Thought:" for web.
std::string step_label(std::string_view what, ToolGrammar grammar, std::size_t step);

inline const std::vector<std::string>& react_stop() {
  static const std::vector<std::string> stop{"\nObservation"};
  return stop;
}

/// Thought and action line split out of one ReAct generation.
struct ReactGeneration {
  std::string thought;
  std::optional<std::string> action_line;  // text after "Action N:", trimmed
};
ReactGeneration split_react_generation(std::string_view text);

/// Answer after the final "Answer:" marker, to the end of that line. Tokens
/// overlapping the answer characters form the span; a trailing standalone
/// ".", "!" or "?" token is dropped from both span and text. Throws
/// AnswerExtractionFailure when the marker is missing or the answer is empty.
ScoredAnswer extract_marked_answer(const Completion& c, std::string_view marker = "Answer:");

/// Answer inside the final Finish[...] of the completion. An empty Finish
/// yields std::nullopt; a missing Finish throws AnswerExtractionFailure.
std::optional<ScoredAnswer> extract_finish_answer(const Completion& c);

/// Character range [begin, end) of `c.text` mapped to tokens and logprobs.
ScoredAnswer span_answer(const Completion& c, std::size_t begin, std::size_t end);

}  // namespace uala
