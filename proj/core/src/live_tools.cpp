// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>

#include <fmt/format.h>

#include "http_client.hpp"
#include "uala/error.hpp"
#include "uala/toolbelt.hpp"

namespace uala {

using nlohmann::json;

namespace {

json get_json(const std::string& base, const std::string& path, std::chrono::seconds timeout) {
  detail::HttpResponse res;
  try {
    res = detail::http_get(base, path, {{"User-Agent", "uala/0.3"}}, timeout);
  } catch (const TransportError& e) {
    throw Error(ErrorCode::ToolTransportError, e.what());
  }
  if (res.status != 200) throw Error(ErrorCode::ToolTransportError, fmt::format("{} returned HTTP {}", base, res.status));
  try {
    return json::parse(res.body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ToolTransportError, fmt::format("{} returned invalid JSON: {}", base, e.what()));
  }
}

}  // namespace

LiveWikiBackend::LiveWikiBackend(std::string base_url, std::size_t suggestion_limit, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), limit_(suggestion_limit), timeout_(timeout) {}

std::optional<std::pair<std::string, std::string>> LiveWikiBackend::parse_extract(const json& body) {
  if (!body.contains("query") || !body["query"].contains("pages")) return std::nullopt;
  for (const auto& page : body["query"]["pages"]) {
    if (page.contains("missing") || page.contains("invalid") || !page.contains("extract")) continue;
    auto text = page["extract"].get<std::string>();
    if (text.empty()) continue;
    return std::make_pair(page.value("title", std::string()), std::move(text));
  }
  return std::nullopt;
}

std::vector<std::string> LiveWikiBackend::parse_search(const json& body, std::size_t limit) {
  std::vector<std::string> out;
  if (!body.contains("query") || !body["query"].contains("search")) return out;
  for (const auto& hit : body["query"]["search"]) {
    if (out.size() >= limit) break;
    out.push_back(hit.value("title", std::string()));
  }
  return out;
}

WikiFetch LiveWikiBackend::fetch(const std::string& entity) {
  const std::string title = detail::url_encode(entity);
  const json page = get_json(
      base_url_, "/w/api.php?action=query&format=json&prop=extracts&explaintext=1&redirects=1&titles=" + title,
      timeout_);
  WikiFetch out;
  if (auto hit = parse_extract(page)) {
    out.found = true;
    out.title = hit->first;
    out.text = hit->second;
    return out;
  }
  const json search = get_json(
      base_url_, fmt::format("/w/api.php?action=query&format=json&list=search&srlimit={}&srsearch={}", limit_, title),
      timeout_);
  out.suggestions = parse_search(search, limit_);
  return out;
}

LiveWebBackend::LiveWebBackend(std::string base_url, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {
  if (const char* key = std::getenv("UALA_SEARCH_API_KEY")) api_key_ = key;
}

SnippetFields LiveWebBackend::parse_serp(const json& body) {
  SnippetFields f;
  if (body.contains("answer_box") && body["answer_box"].is_object()) {
    const json& box = body["answer_box"];
    if (box.contains("answer") && box["answer"].is_string()) f["answer_box"] = box["answer"].get<std::string>();
    if (box.contains("snippet") && box["snippet"].is_string()) f["answer_snippet"] = box["snippet"].get<std::string>();
    if (box.contains("snippet_highlighted_words") && box["snippet_highlighted_words"].is_array() &&
        !box["snippet_highlighted_words"].empty()) {
      f["highlight_words"] = box["snippet_highlighted_words"][0].get<std::string>();
    }
  }
  if (body.contains("organic_results") && body["organic_results"].is_array() && !body["organic_results"].empty()) {
    const json& first = body["organic_results"][0];
    if (first.contains("snippet") && first["snippet"].is_string()) {
      f["first_result_snippet"] = first["snippet"].get<std::string>();
    }
  }
  return f;
}

SnippetFields LiveWebBackend::query(const std::string& q) {
  if (api_key_.empty()) throw Error(ErrorCode::ConfigError, "web search needs UALA_SEARCH_API_KEY");
  return parse_serp(get_json(base_url_,
                             fmt::format("/search.json?engine=google&q={}&api_key={}", detail::url_encode(q),
                                         detail::url_encode(api_key_)),
                             timeout_));
}

}  // namespace uala
