// SPDX-License-Identifier: Apache-2.0
#include "uala/prompts.hpp"

#include <array>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "uala/error.hpp"
#include "uala/normalize.hpp"

#ifndef UALA_INSTALLED_PROMPT_DIR
#define UALA_INSTALLED_PROMPT_DIR "share/uala/prompts"
#endif

namespace uala {

namespace {

constexpr std::array<PromptKind, 4> kKinds{PromptKind::Standard, PromptKind::CoT, PromptKind::ReAct,
                                           PromptKind::Verbal};
constexpr std::array<Dataset, 3> kDatasets{Dataset::HotpotQA, Dataset::StrategyQA, Dataset::MMLU};

[[noreturn]] void extraction_failure(std::string_view why) {
  throw Error(ErrorCode::AnswerExtractionFailure, std::string(why));
}

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

bool standalone_terminal(std::string_view token) {
  const std::string t = trim(token);
  return t == "." || t == "!" || t == "?";
}

}  // namespace

std::string_view to_string(PromptKind k) noexcept {
  switch (k) {
    case PromptKind::Standard: return "standard";
    case PromptKind::CoT: return "cot";
    case PromptKind::ReAct: return "react";
    case PromptKind::Verbal: return "verbal";
  }
  return "unknown";
}

PromptKind prompt_kind_from_string(std::string_view name) {
  for (PromptKind k : kKinds) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorCode::ConfigError, fmt::format("unknown prompt kind '{}'", name));
}

std::filesystem::path default_prompt_dir() {
  if (const char* env = std::getenv("UALA_PROMPT_DIR"); env && *env) return env;
  // An uninstalled build falls back to the templates in its source tree.
  const std::filesystem::path installed = UALA_INSTALLED_PROMPT_DIR;
  return std::filesystem::is_directory(installed) ? installed : std::filesystem::path(UALA_SOURCE_PROMPT_DIR);
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
  PromptLibrary lib;
  for (Dataset d : kDatasets) {
    for (PromptKind k : kKinds) {
      const auto path = dir / fmt::format("{}_{}.txt", to_string(d), to_string(k));
      std::ifstream in(path, std::ios::binary);
      if (!in) continue;
      std::ostringstream ss;
      ss << in.rdbuf();
      std::string text = ss.str();
      while (!text.empty() && is_blank(text.back())) text.pop_back();
      lib.templates_.emplace(std::make_pair(d, k), std::move(text));
    }
  }
  if (lib.templates_.empty()) {
    throw Error(ErrorCode::ConfigError, fmt::format("no prompt templates found in {}", dir.string()));
  }
  return lib;
}

const std::string& PromptLibrary::get(Dataset d, PromptKind k) const {
  auto it = templates_.find({d, k});
  if (it == templates_.end()) {
    throw Error(ErrorCode::ConfigError, fmt::format("missing prompt template {}_{}.txt", to_string(d), to_string(k)));
  }
  return it->second;
}

std::optional<PromptKind> PromptLibrary::classify(Dataset d, std::string_view prompt) const {
  std::optional<PromptKind> best;
  std::size_t best_len = 0;
  for (PromptKind k : kKinds) {
    auto it = templates_.find({d, k});
    if (it == templates_.end()) continue;
    const std::string& t = it->second;
    if (t.size() > best_len && prompt.substr(0, t.size()) == t) {
      best = k;
      best_len = t.size();
    }
  }
  return best;
}

std::string question_block(const QAItem& item) {
  std::string out = fmt::format("Question: {}\n", item.question);
  for (std::size_t i = 0; i < item.choices.size(); ++i) {
    out += fmt::format("{}. {}\n", static_cast<char>('A' + i), item.choices[i]);
  }
  return out;
}

std::string build_prompt(const std::string& tmpl, const QAItem& item) { return tmpl + "\n\n" + question_block(item); }

std::string step_label(std::string_view what, ToolGrammar grammar, std::size_t step) {
  return grammar == ToolGrammar::Wikipedia ? fmt::format("{} {}:", what, step) : fmt::format("{}:", what);
}

ReactGeneration split_react_generation(std::string_view text) {
  ReactGeneration g;
  std::vector<std::string_view> thought_lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    const std::string t = trim(line);
    if (t.rfind("Action", 0) == 0) {
      const auto colon = t.find(':');
      bool numbered = colon != std::string::npos;
      for (std::size_t i = 6; numbered && i < colon; ++i) {
        if (t[i] != ' ' && !std::isdigit(static_cast<unsigned char>(t[i]))) numbered = false;
      }
      if (numbered) {
        g.action_line = trim(std::string_view(t).substr(colon + 1));
        break;
      }
    }
    thought_lines.push_back(line);
    pos = nl + 1;
  }
  std::string thought;
  for (std::size_t i = 0; i < thought_lines.size(); ++i) {
    if (i) thought += '\n';
    thought += thought_lines[i];
  }
  g.thought = trim(thought);
  return g;
}

ScoredAnswer span_answer(const Completion& c, std::size_t begin, std::size_t end) {
  const std::string_view text = c.text;
  while (begin < end && is_blank(text[begin])) ++begin;
  while (end > begin && is_blank(text[end - 1])) --end;

  ScoredAnswer a;
  if (c.tokens.empty()) {
    a.text = std::string(text.substr(begin, end - begin));
    return a;
  }
  std::string joined;
  std::vector<std::size_t> starts;
  for (const auto& t : c.tokens) {
    starts.push_back(joined.size());
    joined += t;
  }
  if (joined != c.text) extraction_failure("completion tokens do not reproduce its text");

  std::vector<std::size_t> picked;
  for (std::size_t i = 0; i < c.tokens.size(); ++i) {
    const std::size_t ts = starts[i];
    const std::size_t te = ts + c.tokens[i].size();
    if (ts < end && te > begin) picked.push_back(i);
  }
  if (picked.size() > 1 && standalone_terminal(c.tokens[picked.back()])) {
    end = std::max(begin, std::min(end, starts[picked.back()]));
    picked.pop_back();
    while (end > begin && is_blank(text[end - 1])) --end;
  }
  a.text = std::string(text.substr(begin, end - begin));
  for (std::size_t i : picked) {
    a.tokens.push_back(c.tokens[i]);
    if (i < c.token_logprobs.size()) a.token_logprobs.push_back(c.token_logprobs[i]);
  }
  if (a.token_logprobs.size() != a.tokens.size()) a.token_logprobs.clear();
  return a;
}

ScoredAnswer extract_marked_answer(const Completion& c, std::string_view marker) {
  const auto at = c.text.rfind(marker);
  if (at == std::string::npos) extraction_failure(fmt::format("no '{}' marker in completion", marker));
  const std::size_t begin = at + marker.size();
  std::size_t end = c.text.find('\n', begin);
  if (end == std::string::npos) end = c.text.size();
  ScoredAnswer a = span_answer(c, begin, end);
  if (trim(a.text).empty()) extraction_failure("empty answer after marker");
  return a;
}

std::optional<ScoredAnswer> extract_finish_answer(const Completion& c) {
  const std::string lower = to_lower_ascii(c.text);
  const auto at = lower.rfind("finish[");
  if (at == std::string::npos) extraction_failure("no Finish[...] in completion");
  const std::size_t begin = at + 7;
  std::size_t line_end = c.text.find('\n', begin);
  if (line_end == std::string::npos) line_end = c.text.size();
  const auto close = c.text.rfind(']', line_end == 0 ? 0 : line_end - 1);
  if (close == std::string::npos || close < begin) extraction_failure("unterminated Finish[...]");
  ScoredAnswer a = span_answer(c, begin, close);
  if (trim(a.text).empty()) return std::nullopt;
  return a;
}

}  // namespace uala
