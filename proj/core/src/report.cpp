// SPDX-License-Identifier: Apache-2.0
#include "uala/report.hpp"

#include <cmath>

#include <fmt/format.h>

#include "uala/error.hpp"

namespace uala {

using nlohmann::json;

namespace {

constexpr std::array kSources{AnswerSource::Base, AnswerSource::Tool, AnswerSource::Backoff, AnswerSource::Oracle};

}  // namespace

double em_percent(std::size_t correct, std::size_t n) {
  if (n == 0) return 0.0;
  return std::round(1000.0 * static_cast<double>(correct) / static_cast<double>(n)) / 10.0;
}

RunReport aggregate(std::span<const EpisodeRecord> records) {
  if (records.empty()) throw Error(ErrorCode::InsufficientData, "cannot aggregate an empty run");
  RunReport r;
  r.method = records.front().method;
  r.n_items = records.size();
  for (const auto& e : records) {
    if (e.method != r.method) r.method = "mixed";
    r.correct += e.em_correct ? 1 : 0;
    r.tool_calls += e.tool_calls;
    r.output_tokens += e.output_tokens;
    if (!e.decisions.empty() && e.decisions.front().outcome == Outcome::Escalate) ++r.base_escalations;
    if (e.answer_source && e.final_answer) {
      ++r.by_source[static_cast<std::size_t>(*e.answer_source)];
    } else {
      ++r.no_answer;
    }
    r.items.push_back({e.id, e.final_answer, e.answer_source, e.em_correct, e.tool_calls, e.output_tokens});
  }
  r.em = em_percent(r.correct, r.n_items);
  return r;
}

json report_to_json(const RunReport& r) {
  json sources = json::object();
  for (AnswerSource s : kSources) sources[std::string(to_string(s))] = r.by_source[static_cast<std::size_t>(s)];
  sources["none"] = r.no_answer;
  json items = json::array();
  for (const auto& i : r.items) {
    items.push_back({{"id", i.id},
                     {"final_answer", i.final_answer ? json(*i.final_answer) : json(nullptr)},
                     {"answer_source", i.answer_source ? json(std::string(to_string(*i.answer_source))) : json(nullptr)},
                     {"em_correct", i.em_correct},
                     {"tool_calls", i.tool_calls},
                     {"output_tokens", i.output_tokens}});
  }
  return {{"format", "uala.run-report/1"},
          {"method", r.method},
          {"n_items", r.n_items},
          {"correct", r.correct},
          {"em", r.em},
          {"tool_calls", r.tool_calls},
          {"output_tokens", r.output_tokens},
          {"base_escalations", r.base_escalations},
          {"by_source", std::move(sources)},
          {"items", std::move(items)}};
}

std::string report_to_text(const RunReport& r) {
  std::string out = fmt::format("{:<24} {:>6} {:>6} {:>11} {:>14}\n", "method", "n", "EM", "tool calls",
                                "output tokens");
  out += fmt::format("{:<24} {:>6} {:>6.1f} {:>11} {:>14}\n", r.method, r.n_items, r.em, r.tool_calls,
                     r.output_tokens);
  out += fmt::format("answers from: base {}, tool {}, backoff {}, oracle {}, none {}\n", r.by_source[0],
                     r.by_source[1], r.by_source[2], r.by_source[3], r.no_answer);
  out += fmt::format("escalated after the base attempt: {}\n", r.base_escalations);
  return out;
}

}  // namespace uala
