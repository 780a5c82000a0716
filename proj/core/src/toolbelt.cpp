// SPDX-License-Identifier: Apache-2.0
#include "uala/toolbelt.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "uala/canonical_json.hpp"
#include "uala/error.hpp"
#include "uala/normalize.hpp"

namespace uala {

using nlohmann::json;

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

[[noreturn]] void malformed(std::string_view line, std::string_view why) {
  throw Error(ErrorCode::MalformedAction, fmt::format("{}: '{}'", why, line));
}

// Strips "Action", optional step number and the colon.
std::string_view strip_action_prefix(std::string_view s) {
  constexpr std::string_view kAction = "Action";
  if (s.substr(0, kAction.size()) != kAction) return s;
  std::size_t i = kAction.size();
  while (i < s.size() && s[i] == ' ') ++i;
  while (i < s.size() && is_digit(s[i])) ++i;
  while (i < s.size() && s[i] == ' ') ++i;
  if (i < s.size() && s[i] == ':') return s.substr(i + 1);
  return s;
}

// Title abbreviations whose period does not end a sentence.
bool is_abbreviation(std::string_view text, std::size_t dot) {
  std::size_t start = dot;
  while (start > 0 && is_alpha(text[start - 1])) --start;
  const std::string_view word = text.substr(start, dot - start);
  if (start > 0 && is_alnum(text[start - 1])) return false;
  if (word.size() == 1) return true;
  static const std::array<std::string_view, 10> kTitles{"Mr", "Mrs", "Ms", "Dr", "Jr", "Sr", "St", "Prof", "vs", "Mt"};
  return std::find(kTitles.begin(), kTitles.end(), word) != kTitles.end();
}

// Closing quotes/brackets and citation markers like "[3]" after the terminator.
std::size_t skip_closers(std::string_view text, std::size_t j) {
  for (;;) {
    if (j < text.size() && (text[j] == '"' || text[j] == '\'' || text[j] == ')')) {
      ++j;
      continue;
    }
    if (j < text.size() && text[j] == '[') {
      std::size_t k = j + 1;
      while (k < text.size() && is_digit(text[k])) ++k;
      if (k > j + 1 && k < text.size() && text[k] == ']') {
        j = k + 1;
        continue;
      }
    }
    return j;
  }
}

std::vector<std::string> word_set(std::string_view s) {
  std::set<std::string> words;
  std::string cur;
  for (char c : s) {
    if (is_alnum(c)) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      words.insert(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) words.insert(cur);
  return {words.begin(), words.end()};
}

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::string> inter;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
  const std::size_t uni = a.size() + b.size() - inter.size();
  return uni == 0 ? 0.0 : static_cast<double>(inter.size()) / static_cast<double>(uni);
}

bool contains_ci(std::string_view hay, std::string_view needle) {
  return to_lower_ascii(hay).find(to_lower_ascii(needle)) != std::string::npos;
}

}  // namespace

std::string_view to_string(ActionKind k) noexcept {
  switch (k) {
    case ActionKind::Search: return "search";
    case ActionKind::Lookup: return "lookup";
    case ActionKind::WebSearch: return "web-search";
    case ActionKind::Finish: return "finish";
  }
  return "unknown";
}

std::string_view to_string(ToolGrammar g) noexcept { return g == ToolGrammar::Wikipedia ? "wikipedia" : "web"; }

ToolGrammar tool_grammar_from_string(std::string_view name) {
  if (name == "wikipedia") return ToolGrammar::Wikipedia;
  if (name == "web") return ToolGrammar::Web;
  throw Error(ErrorCode::ConfigError, fmt::format("unknown tool grammar '{}'", name));
}

ToolAction parse_action(std::string_view line, ToolGrammar grammar) {
  const std::string s = trim(strip_action_prefix(trim(line)));
  const auto open = s.find('[');
  const auto close = s.rfind(']');
  if (open == std::string::npos || close == std::string::npos || close < open || close + 1 != s.size()) {
    malformed(line, "expected Verb[argument]");
  }
  const std::string verb = to_lower_ascii(trim(std::string_view(s).substr(0, open)));
  ToolAction action;
  action.argument = trim(std::string_view(s).substr(open + 1, close - open - 1));
  if (verb == "finish") {
    action.kind = ActionKind::Finish;
    return action;
  }
  if (verb == "search") {
    action.kind = grammar == ToolGrammar::Wikipedia ? ActionKind::Search : ActionKind::WebSearch;
  } else if (verb == "lookup" && grammar == ToolGrammar::Wikipedia) {
    action.kind = ActionKind::Lookup;
  } else {
    malformed(line, "unknown action verb");
  }
  if (action.argument.empty()) malformed(line, "empty action argument");
  return action;
}

std::string render_action(const ToolAction& action, ToolGrammar grammar) {
  const bool web = grammar == ToolGrammar::Web;
  std::string_view verb;
  switch (action.kind) {
    case ActionKind::Search:
    case ActionKind::WebSearch: verb = web ? "search" : "Search"; break;
    case ActionKind::Lookup: verb = "Lookup"; break;
    case ActionKind::Finish: verb = web ? "finish" : "Finish"; break;
  }
  return fmt::format("{}[{}]", verb, action.argument);
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  auto emit = [&](std::size_t from, std::size_t to) {
    std::string s = trim(text.substr(from, to - from));
    if (!s.empty()) out.push_back(std::move(s));
  };
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      emit(start, i);
      start = i + 1;
      continue;
    }
    if (c != '.' && c != '!' && c != '?') continue;
    const std::size_t end = skip_closers(text, i + 1);
    if (end < text.size() && !is_space(text[end])) continue;
    std::size_t k = end;
    while (k < text.size() && text[k] == ' ') ++k;
    const bool next_ok = k >= text.size() || text[k] == '\n' || is_upper(text[k]) || is_digit(text[k]) ||
                         text[k] == '"' || text[k] == '\'';
    if (!next_ok) continue;
    if (c == '.' && end == i + 1 && is_abbreviation(text, i)) continue;
    emit(start, end);
    start = end;
    i = end - 1;
  }
  emit(start, text.size());
  return out;
}

std::string_view to_string(ObservationSource s) noexcept {
  switch (s) {
    case ObservationSource::WikiPage: return "wiki-page";
    case ObservationSource::WikiSuggestions: return "wiki-suggestions";
    case ObservationSource::WikiLookup: return "wiki-lookup";
    case ObservationSource::WebSnippet: return "web-snippet";
    case ObservationSource::Mock: return "mock";
    case ObservationSource::NoResult: return "no-result";
    case ObservationSource::EmptySnippet: return "empty-snippet";
  }
  return "unknown";
}

std::string python_list_repr(const std::vector<std::string>& items) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    const std::string& s = items[i];
    const bool dq = s.find('\'') != std::string::npos && s.find('"') == std::string::npos;
    const char q = dq ? '"' : '\'';
    out += q;
    for (char c : s) {
      if (c == '\\' || (c == q && !dq)) out += '\\';
      out += c;
    }
    out += q;
  }
  return out + "]";
}

// --- mock backends ----------------------------------------------------------

MockWikiBackend::MockWikiBackend(std::map<std::string, std::string> pages,
                                 std::map<std::string, std::vector<std::string>> suggestions,
                                 std::size_t suggestion_limit)
    : pages_(std::move(pages)), suggestions_(std::move(suggestions)), limit_(suggestion_limit) {
  for (const auto& [title, _] : pages_) lower_to_title_.emplace(to_lower_ascii(title), title);
}

WikiFetch MockWikiBackend::fetch(const std::string& entity) {
  WikiFetch out;
  if (auto it = lower_to_title_.find(to_lower_ascii(trim(entity))); it != lower_to_title_.end()) {
    out.found = true;
    out.title = it->second;
    out.text = pages_.at(it->second);
    return out;
  }
  if (auto it = suggestions_.find(entity); it != suggestions_.end()) {
    out.suggestions = it->second;
  } else {
    const auto query = word_set(entity);
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& [title, _] : pages_) {
      const double score = jaccard(query, word_set(title));
      if (score > 0.0) scored.emplace_back(-score, title);
    }
    std::sort(scored.begin(), scored.end());
    for (auto& [_, title] : scored) out.suggestions.push_back(std::move(title));
  }
  if (out.suggestions.size() > limit_) out.suggestions.resize(limit_);
  return out;
}

MockWebBackend::MockWebBackend(std::map<std::string, SnippetFields> results) : results_(std::move(results)) {}

SnippetFields MockWebBackend::query(const std::string& q) {
  auto it = results_.find(q);
  return it == results_.end() ? SnippetFields{} : it->second;
}

MockCorpus load_mock_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, fmt::format("cannot open {}", path.string()));
  try {
    const json j = json::parse(in);
    MockCorpus corpus;
    corpus.wiki = std::make_shared<MockWikiBackend>(
        j.value("pages", std::map<std::string, std::string>{}),
        j.value("suggestions", std::map<std::string, std::vector<std::string>>{}),
        j.value("suggestion_limit", std::size_t{5}));
    corpus.web = std::make_shared<MockWebBackend>(j.value("web", std::map<std::string, SnippetFields>{}));
    return corpus;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, fmt::format("{}: {}", path.string(), e.what()));
  }
}

// --- tapes ------------------------------------------------------------------

std::shared_ptr<ToolTape> ToolTape::load(const std::filesystem::path& path) {
  auto tape = std::make_shared<ToolTape>();
  for (const auto& rec : read_jsonl(path)) {
    try {
      tape->records_.emplace(rec.at("key").get<std::string>(), rec);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigError, fmt::format("{}: {}", path.string(), e.what()));
    }
  }
  return tape;
}

void ToolTape::save(const std::filesystem::path& path) const {
  std::lock_guard lock(mu_);
  std::vector<json> out;
  for (const auto& [_, rec] : records_) out.push_back(rec);
  write_jsonl(path, out);
}

std::string ToolTape::key(std::string_view tool, std::string_view query) {
  return sha256_hex(canonical_dump({{"tool", tool}, {"query", query}}));
}

std::optional<json> ToolTape::find(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = records_.find(key);
  if (it == records_.end()) return std::nullopt;
  return std::optional<json>(std::in_place, it->second.at("response"));
}

void ToolTape::put(const std::string& key, std::string_view tool, std::string_view query, json response) {
  std::lock_guard lock(mu_);
  records_.insert_or_assign(key, json{{"key", key}, {"tool", tool}, {"query", query}, {"response", std::move(response)}});
}

std::size_t ToolTape::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

TapeWikiBackend::TapeWikiBackend(std::shared_ptr<ToolTape> tape, std::shared_ptr<WikiBackend> record_from)
    : tape_(std::move(tape)), inner_(std::move(record_from)) {}

WikiFetch TapeWikiBackend::fetch(const std::string& entity) {
  const std::string k = ToolTape::key("wiki", entity);
  if (!inner_) {
    const auto rec = tape_->find(k);
    if (!rec) throw FixtureMiss(k, "tool tape");
    return {rec->at("found").get<bool>(), rec->at("title").get<std::string>(), rec->at("text").get<std::string>(),
            rec->at("suggestions").get<std::vector<std::string>>()};
  }
  WikiFetch f = inner_->fetch(entity);
  tape_->put(k, "wiki", entity,
             {{"found", f.found}, {"title", f.title}, {"text", f.text}, {"suggestions", f.suggestions}});
  return f;
}

TapeWebBackend::TapeWebBackend(std::shared_ptr<ToolTape> tape, std::shared_ptr<WebBackend> record_from)
    : tape_(std::move(tape)), inner_(std::move(record_from)) {}

SnippetFields TapeWebBackend::query(const std::string& q) {
  const std::string k = ToolTape::key("web", q);
  if (!inner_) {
    const auto rec = tape_->find(k);
    if (!rec) throw FixtureMiss(k, "tool tape");
    return rec->get<SnippetFields>();
  }
  SnippetFields f = inner_->query(q);
  tape_->put(k, "web", q, json(f));
  return f;
}

// --- session ----------------------------------------------------------------

ToolSession::ToolSession(ToolEnvironment& env, ToolGrammar grammar) : env_(env), grammar_(grammar) {}

void ToolSession::count(std::atomic<std::size_t>& counter) {
  ++calls_;
  counter.fetch_add(1, std::memory_order_relaxed);
}

Observation ToolSession::execute(const ToolAction& action) {
  switch (action.kind) {
    case ActionKind::Search:
      if (grammar_ != ToolGrammar::Wikipedia) break;
      return wiki_search(action.argument);
    case ActionKind::Lookup:
      if (grammar_ != ToolGrammar::Wikipedia) break;
      return wiki_lookup(action.argument);
    case ActionKind::WebSearch:
      if (grammar_ != ToolGrammar::Web) break;
      return web_search(action.argument);
    case ActionKind::Finish:
      throw Error(ErrorCode::MalformedAction, "Finish is not a tool call");
  }
  throw Error(ErrorCode::MalformedAction,
              fmt::format("action {} not available in the {} grammar", to_string(action.kind), to_string(grammar_)));
}

Observation ToolSession::wiki_search(const std::string& entity) {
  if (!env_.wiki) throw Error(ErrorCode::ConfigError, "no Wikipedia backend configured");
  const WikiFetch f = env_.wiki->fetch(entity);
  count(env_.usage.search);
  if (!f.found) {
    return {fmt::format("Could not find [{}]. Similar: {}.", entity, python_list_repr(f.suggestions)),
            ObservationSource::WikiSuggestions, true};
  }
  auto sentences = split_sentences(f.text);
  page_ = sentences;
  lookup_keyword_.clear();
  lookup_hits_.clear();
  lookup_cursor_ = 0;
  std::string text;
  for (std::size_t i = 0; i < std::min<std::size_t>(5, sentences.size()); ++i) {
    if (i) text += ' ';
    text += sentences[i];
  }
  return {text, ObservationSource::WikiPage, true};
}

Observation ToolSession::wiki_lookup(const std::string& keyword) {
  if (!page_) throw Error(ErrorCode::NoPageContext, "lookup before any successful search");
  count(env_.usage.lookup);
  if (to_lower_ascii(keyword) != to_lower_ascii(lookup_keyword_)) {
    lookup_keyword_ = keyword;
    lookup_hits_.clear();
    lookup_cursor_ = 0;
    for (const auto& s : *page_) {
      if (contains_ci(s, keyword)) lookup_hits_.push_back(s);
    }
  }
  if (lookup_cursor_ >= lookup_hits_.size()) return {"No more results.", ObservationSource::NoResult, true};
  const std::size_t i = lookup_cursor_++;
  return {fmt::format("(Result {} / {}) {}", i + 1, lookup_hits_.size(), lookup_hits_[i]),
          ObservationSource::WikiLookup, true};
}

Observation ToolSession::web_search(const std::string& query) {
  if (!env_.web) throw Error(ErrorCode::ConfigError, "no web-search backend configured");
  const SnippetFields fields = env_.web->query(query);
  count(env_.usage.web_search);
  for (const auto& name : env_.snippet_priority) {
    auto it = fields.find(name);
    if (it != fields.end() && !trim(it->second).empty()) return {it->second, ObservationSource::WebSnippet, true};
  }
  return {"No snippet found.", ObservationSource::EmptySnippet, true};
}

}  // namespace uala
