// SPDX-License-Identifier: Apache-2.0
#include "uala/normalize.hpp"

#include <cctype>
#include <sstream>

namespace uala {

namespace {

bool is_ascii_punct(unsigned char c) { return c < 128 && std::ispunct(c); }

bool is_article(std::string_view w) { return w == "a" || w == "an" || w == "the"; }

}  // namespace

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\f\v");
  return std::string(s.substr(first, last - first + 1));
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 128) c = static_cast<char>(std::tolower(u));
  }
  return out;
}

std::string normalize_answer(std::string_view s) {
  std::string no_punct;
  no_punct.reserve(s.size());
  for (char c : to_lower_ascii(s)) {
    if (!is_ascii_punct(static_cast<unsigned char>(c))) no_punct.push_back(c);
  }

  // Articles are whole words; splitting on whitespace both removes them and
  // collapses runs of whitespace.
  std::istringstream words(no_punct);
  std::string out;
  for (std::string w; words >> w;) {
    if (is_article(w)) continue;
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

bool exact_match(const std::optional<std::string>& pred, std::string_view gold) {
  if (!pred) return false;
  return normalize_answer(*pred) == normalize_answer(gold);
}

}  // namespace uala
