// SPDX-License-Identifier: Apache-2.0
#pragma once

// Run aggregation: EM, cost totals and where final answers came from.

#include <array>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uala/records.hpp"

namespace uala {

struct ItemResult {
  std::string id;
  std::optional<std::string> final_answer;
  std::optional<AnswerSource> answer_source;
  bool em_correct = false;
  std::size_t tool_calls = 0;
  std::size_t output_tokens = 0;
};

struct RunReport {
  std::string method;
  std::size_t n_items = 0;
  std::size_t correct = 0;
  double em = 0.0;  // percentage, one decimal
  std::size_t tool_calls = 0;
  std::size_t output_tokens = 0;
  std::size_t base_escalations = 0;  // episodes whose first decision escalated
  std::array<std::size_t, 4> by_source{};  // indexed by AnswerSource
  std::size_t no_answer = 0;
  std::vector<ItemResult> items;
};

/// Throws InsufficientData on an empty run.
RunReport aggregate(std::span<const EpisodeRecord> records);

/// 100 * correct / n rounded half away from zero to one decimal.
double em_percent(std::size_t correct, std::size_t n);

nlohmann::json report_to_json(const RunReport& r);
std::string report_to_text(const RunReport& r);

}  // namespace uala
