// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace uala {

/// SQuAD-style answer normalisation: lowercase, drop ASCII punctuation, drop
/// the articles a/an/the, collapse whitespace. Idempotent.
std::string normalize_answer(std::string_view s);

/// Absent prediction never matches.
bool exact_match(const std::optional<std::string>& pred, std::string_view gold);

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

}  // namespace uala
