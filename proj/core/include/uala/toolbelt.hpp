// SPDX-License-Identifier: Apache-2.0
#pragma once

// Agent actions and the tools behind them: Wikipedia search/lookup, web-search
// snippets, mock corpora for offline runs and record/replay tapes.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace uala {

enum class ActionKind { Search, Lookup, WebSearch, Finish };

/// Wikipedia: Search/Lookup/Finish. Web: search/finish.
enum class ToolGrammar { Wikipedia, Web };

std::string_view to_string(ActionKind k) noexcept;
std::string_view to_string(ToolGrammar g) noexcept;
ToolGrammar tool_grammar_from_string(std::string_view name);

struct ToolAction {
  ActionKind kind = ActionKind::Finish;
  std::string argument;

  bool operator==(const ToolAction&) const = default;
};

/// Parses "Verb[argument]", optionally preceded by "Action N:" or "Action:".
/// Verbs match case-insensitively; the argument runs to the last ']' and is
/// trimmed. Throws MalformedAction for unknown verbs, bad brackets, or an
/// empty Search/Lookup argument. An empty Finish is allowed.
ToolAction parse_action(std::string_view line, ToolGrammar grammar);

/// Inverse of parse_action for well-formed actions: "Search[x]" in the
/// Wikipedia grammar, "search[x]" in the web grammar.
std::string render_action(const ToolAction& action, ToolGrammar grammar);

/// Sentence segmentation used for "first five sentences" and lookup.
/// A boundary is a newline, or [.!?] (plus closing quotes, brackets and
/// citation markers such as "[3]") followed by whitespace and then an
/// upper-case letter, digit, quote or end of text. A period ending a single
/// letter or a common title abbreviation (Jr., Dr., St., ...) is not a boundary.
std::vector<std::string> split_sentences(std::string_view text);

enum class ObservationSource { WikiPage, WikiSuggestions, WikiLookup, WebSnippet, Mock, NoResult, EmptySnippet };

std::string_view to_string(ObservationSource s) noexcept;

struct Observation {
  std::string text;
  ObservationSource source = ObservationSource::Mock;
  bool call_counted = false;
};

/// Python-style list repr used in the suggestion observation: ['a', 'b'].
std::string python_list_repr(const std::vector<std::string>& items);

// --- backends ---------------------------------------------------------------

struct WikiFetch {
  bool found = false;
  std::string title;
  std::string text;                      // page plain text when found
  std::vector<std::string> suggestions;  // ranked, already limited, when not found
};

class WikiBackend {
 public:
  virtual ~WikiBackend() = default;
  virtual WikiFetch fetch(const std::string& entity) = 0;
};

/// Field name -> value, e.g. {"answer_box": "...", "first_result_snippet": "..."}.
using SnippetFields = std::map<std::string, std::string>;

class WebBackend {
 public:
  virtual ~WebBackend() = default;
  virtual SnippetFields query(const std::string& q) = 0;
};

inline const std::vector<std::string>& default_snippet_priority() {
  static const std::vector<std::string> order{"answer_box", "answer_snippet", "highlight_words",
                                              "first_result_snippet"};
  return order;
}

/// In-memory corpus. Page lookup is case-insensitive on the title. On a miss
/// the suggestions are the explicit list for that query if one exists,
/// otherwise titles ranked by word-set Jaccard overlap with the query (ties by
/// title), zero overlap excluded; either way truncated to `suggestion_limit`.
class MockWikiBackend : public WikiBackend {
 public:
  MockWikiBackend(std::map<std::string, std::string> pages,
                  std::map<std::string, std::vector<std::string>> suggestions = {},
                  std::size_t suggestion_limit = 5);
  WikiFetch fetch(const std::string& entity) override;

 private:
  std::map<std::string, std::string> pages_;
  std::map<std::string, std::string> lower_to_title_;
  std::map<std::string, std::vector<std::string>> suggestions_;
  std::size_t limit_;
};

class MockWebBackend : public WebBackend {
 public:
  explicit MockWebBackend(std::map<std::string, SnippetFields> results);
  SnippetFields query(const std::string& q) override;

 private:
  std::map<std::string, SnippetFields> results_;
};

/// Corpus file: {"pages": {title: text}, "suggestions": {query: [titles]},
///               "suggestion_limit": 5, "web": {query: {field: value}}}
struct MockCorpus {
  std::shared_ptr<MockWikiBackend> wiki;
  std::shared_ptr<MockWebBackend> web;
};
MockCorpus load_mock_corpus(const std::filesystem::path& path);

/// MediaWiki api.php: exact-title extract, falling back to full-text search
/// for suggestions. Transport problems throw ToolTransportError.
class LiveWikiBackend : public WikiBackend {
 public:
  explicit LiveWikiBackend(std::string base_url = "https://en.wikipedia.org", std::size_t suggestion_limit = 5,
                           std::chrono::seconds timeout = std::chrono::seconds{30});
  WikiFetch fetch(const std::string& entity) override;

  /// Extracts the fields of a MediaWiki query response (exposed for offline tests).
  static std::optional<std::pair<std::string, std::string>> parse_extract(const nlohmann::json& body);
  static std::vector<std::string> parse_search(const nlohmann::json& body, std::size_t limit);

 private:
  std::string base_url_;
  std::size_t limit_;
  std::chrono::seconds timeout_;
};

/// SerpAPI-shaped JSON search endpoint; key from UALA_SEARCH_API_KEY.
class LiveWebBackend : public WebBackend {
 public:
  explicit LiveWebBackend(std::string base_url = "https://serpapi.com",
                          std::chrono::seconds timeout = std::chrono::seconds{30});
  SnippetFields query(const std::string& q) override;

  /// Maps a SerpAPI response onto the snippet field names.
  static SnippetFields parse_serp(const nlohmann::json& body);

 private:
  std::string base_url_;
  std::string api_key_;
  std::chrono::seconds timeout_;
};

/// Recorded tool responses keyed by SHA-256 of {tool, query}; JSONL on disk.
class ToolTape {
 public:
  static std::shared_ptr<ToolTape> load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  static std::string key(std::string_view tool, std::string_view query);
  std::optional<nlohmann::json> find(const std::string& key) const;
  void put(const std::string& key, std::string_view tool, std::string_view query, nlohmann::json response);
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, nlohmann::json> records_;
};

/// Replays a tape (miss -> FixtureMiss) or records through an inner backend.
class TapeWikiBackend : public WikiBackend {
 public:
  TapeWikiBackend(std::shared_ptr<ToolTape> tape, std::shared_ptr<WikiBackend> record_from = nullptr);
  WikiFetch fetch(const std::string& entity) override;

 private:
  std::shared_ptr<ToolTape> tape_;
  std::shared_ptr<WikiBackend> inner_;
};

class TapeWebBackend : public WebBackend {
 public:
  TapeWebBackend(std::shared_ptr<ToolTape> tape, std::shared_ptr<WebBackend> record_from = nullptr);
  SnippetFields query(const std::string& q) override;

 private:
  std::shared_ptr<ToolTape> tape_;
  std::shared_ptr<WebBackend> inner_;
};

// --- sessions ---------------------------------------------------------------

/// Executed external calls across a run; shared by all sessions.
struct ToolUsage {
  std::atomic<std::size_t> search{0};
  std::atomic<std::size_t> lookup{0};
  std::atomic<std::size_t> web_search{0};

  std::size_t total() const noexcept { return search + lookup + web_search; }
};

struct ToolEnvironment {
  std::shared_ptr<WikiBackend> wiki;
  std::shared_ptr<WebBackend> web;
  std::vector<std::string> snippet_priority = default_snippet_priority();
  ToolUsage usage;
};

/// Per-trajectory tool state: the loaded page and the lookup cursor.
class ToolSession {
 public:
  ToolSession(ToolEnvironment& env, ToolGrammar grammar);

  /// Runs Search/Lookup/WebSearch. Throws NoPageContext (lookup before any
  /// search), ToolTransportError, or MalformedAction for Finish or an action
  /// outside the grammar. Successful executions count one call each.
  Observation execute(const ToolAction& action);

  Observation wiki_search(const std::string& entity);
  Observation wiki_lookup(const std::string& keyword);
  Observation web_search(const std::string& query);

  std::size_t calls() const noexcept { return calls_; }

 private:
  void count(std::atomic<std::size_t>& counter);

  ToolEnvironment& env_;
  ToolGrammar grammar_;
  std::size_t calls_ = 0;
  std::optional<std::vector<std::string>> page_;
  std::string lookup_keyword_;
  std::vector<std::string> lookup_hits_;
  std::size_t lookup_cursor_ = 0;
};

}  // namespace uala
