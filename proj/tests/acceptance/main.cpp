// SPDX-License-Identifier: Apache-2.0
// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "app/commands.hpp"
#include "oracle/mp_oracle.hpp"
#include "support/app_fixture.hpp"
#include "support/stats_fixtures.hpp"
#include "uala/calibration.hpp"
#include "uala/normalize.hpp"
#include "uala/toolbelt.hpp"

namespace {

using namespace uala;
using nlohmann::json;
namespace fs = std::filesystem;
namespace ut = uala::testing;

struct Verdict {
  bool pass = true;
  std::string detail;
};

// Runs `check`, turning an escaped exception into a FAIL with its message.
bool report(int id, const std::string& name, const std::function<Verdict()>& check) {
  Verdict v;
  try {
    v = check();
  } catch (const std::exception& e) {
    v = {false, fmt::format("exception: {}", e.what())};
  }
  std::cout << fmt::format("{} [{}] {}: {}\n", v.pass ? "PASS" : "FAIL", id, name, v.detail) << std::flush;
  return v.pass;
}

std::vector<double> random_logprobs(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> lp(-12.0, -1e-6);
  std::vector<double> p(n);
  for (auto& v : p) v = lp(rng);
  return p;
}

double free_form(const std::vector<double>& p, Method m) {
  ScoredAnswer a;
  a.tokens.assign(p.size(), "t");
  a.token_logprobs = p;
  return estimate_free_form(a, m).value;
}

bool close_rel(double a, double b, double rel) { return std::fabs(a - b) <= rel * std::max(1.0, std::fabs(b)); }

Verdict estimators() {
  constexpr double kTol = 1e-9;
  std::mt19937_64 rng(20240101);
  std::uniform_int_distribution<std::size_t> len(2, 32), pool_pick(0, 5), n_samples(1, 12);
  const std::vector<std::string> pool{"Richard Nixon", "richard nixon.", "The Nixon", "Gerald Ford", "Ford", "Carter"};
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::size_t failures = 0;
  auto track = [&](double got, double want) {
    const double d = std::fabs(got - want);
    worst = std::max(worst, d);
    if (!(d <= kTol)) ++failures;
  };
  for (int i = 0; i < 1000; ++i) {
    const auto p = random_logprobs(rng, len(rng));
    track(free_form(p, Method::Minimum), oracle::minimum(p));
    track(free_form(p, Method::Average), oracle::average(p));
    track(free_form(p, Method::NormalisedProduct), oracle::normalised_product(p));
    track(free_form(p, Method::LogSum), oracle::log_sum(p));
    track(free_form(p, Method::Entropy), oracle::entropy(p));
    track(estimate_single_token(p[0]).value, oracle::single_token(p[0]));

    const std::string primary = pool[pool_pick(rng)];
    std::vector<std::string> samples(n_samples(rng));
    for (auto& s : samples) s = pool[pool_pick(rng)];
    std::vector<std::string> normalised;
    for (const auto& s : samples) normalised.push_back(normalize_answer(s));
    track(estimate_multi_inference(primary, samples).value,
          oracle::disagreement(normalize_answer(primary), normalised));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {failures == 0 && secs < 5.0,
          fmt::format("7 estimators x 1000 inputs, max |delta| {:.3g} (tol 1e-9), {} over tolerance, {:.2f} s (limit 5 s)",
                      worst, failures, secs)};
}

Verdict identities() {
  // "Exact" is taken as agreement to 1e-12 relative: each side is a separate
  // double-precision evaluation of the same real number.
  constexpr double kRel = 1e-12;
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> len(2, 64);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);
  std::size_t bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto p = random_logprobs(rng, len(rng));
    const double n = static_cast<double>(p.size());
    const double ln_n = std::log(n);
    if (!close_rel(free_form(p, Method::Average), ln_n, kRel)) ++bad;
    if (!close_rel(free_form(p, Method::LogSum), n * free_form(p, Method::NormalisedProduct), kRel)) ++bad;
    const double h = free_form(p, Method::Entropy);
    if (!(h < ln_n) || close_rel(h, ln_n, kRel)) ++bad;  // random p is never uniform
    std::vector<double> uniform(p.size(), p[0]);
    if (!close_rel(free_form(uniform, Method::Entropy), ln_n, kRel)) ++bad;
    const double s = shift(rng);
    const auto z = softmax_over_sequence(p).z;
    std::vector<double> shifted = p;
    for (auto& v : shifted) v += s;
    const auto zs = softmax_over_sequence(shifted).z;
    for (std::size_t k = 0; k < z.size(); ++k) {
      if (!close_rel(z[k], zs[k], 1e-9)) ++bad;  // shifting by s loses up to |s| ulps of the inputs
    }
  }
  return {bad == 0, fmt::format("1000 random sequences: Average = ln n, LogSum = n*NP, Entropy < ln n (= ln n when "
                                "uniform), softmax shift invariance; {} violations",
                                bad)};
}

std::vector<std::vector<double>> random_set(std::mt19937_64& rng, std::size_t count, std::size_t n) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(random_logprobs(rng, n));
  return out;
}

std::set<std::size_t> escalated(const std::vector<std::vector<double>>& cal, const std::vector<std::vector<double>>& test,
                                Method m, double q) {
  std::vector<double> values;
  for (const auto& p : cal) values.push_back(free_form(p, m));
  const double tau = quantile_linear(values, q);
  std::set<std::size_t> out;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (route(Uncertainty{free_form(test[i], m), m}, tau) == Outcome::Escalate) out.insert(i);
  }
  return out;
}

Verdict monotone_transform() {
  std::mt19937_64 rng(500);
  std::uniform_int_distribution<std::size_t> len(2, 24), cal_size(5, 60), test_size(5, 60);
  std::uniform_real_distribution<double> qd(0.1, 0.9);
  std::size_t mismatched = 0, compared = 0;
  for (int pair = 0; pair < 500; ++pair) {
    // LogSum = n * NP is a monotone map only when n is shared, so each pair
    // fixes one answer length.
    const std::size_t n = len(rng);
    const auto cal = random_set(rng, cal_size(rng), n);
    const auto test = random_set(rng, test_size(rng), n);
    const double q = qd(rng);
    const auto a = escalated(cal, test, Method::LogSum, q);
    const auto b = escalated(cal, test, Method::NormalisedProduct, q);
    std::vector<std::size_t> diff;
    std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
    mismatched += diff.size();
    compared += test.size();
  }
  return {mismatched == 0, fmt::format("500 calibration/test pairs (common answer length per pair), {} routing "
                                       "decisions, {} mismatches",
                                       compared, mismatched)};
}

json read_json(const fs::path& p) { return json::parse(ut::read_file(p)); }

Verdict quantile_monotonicity() {
  const auto dir = ut::fixture_dir() / "hotpot-mini-20";
  const CalibrationSet cal = calibration_set_from_json(read_json(dir / "calibration-set.json"));
  std::vector<std::optional<double>> test_u;
  const json expected = read_json(dir / "expected.json");
  for (const auto& e : expected["episodes"]) {
    const bool scored = e.contains("base_uncertainty") && !e["base_uncertainty"].is_null();
    test_u.push_back(scored ? std::optional<double>(e["base_uncertainty"].get<double>()) : std::nullopt);
  }
  const std::vector<double> qs{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  // The stage-1 decision depends only on the base uncertainty and tau.
  const auto table = sweep_quantiles(cal, qs, [&](const CalibrationProfile& p) {
    SweepOutcome o;
    for (const auto& u : test_u) {
      if (route(u ? std::optional<Uncertainty>(Uncertainty{*u, Method::Entropy}) : std::nullopt, p.tau) ==
          Outcome::Escalate) {
        ++o.escalations;
      }
    }
    return o;
  });
  std::string counts;
  for (const auto& r : table.rows) counts += fmt::format("{}{}", counts.empty() ? "" : ",", r.outcome.escalations);
  const bool strictly_fewer = table.rows.front().outcome.escalations > table.rows.back().outcome.escalations;
  return {table.escalations_non_increasing && strictly_fewer,
          fmt::format("hotpot-mini-20, q = 0.1..0.9 -> escalations [{}]", counts)};
}

std::optional<double> opt_number(const json& j, const char* key) {
  return j.contains(key) && !j[key].is_null() ? std::optional<double>(j[key].get<double>()) : std::nullopt;
}

std::optional<std::string> opt_string(const json& j, const char* key) {
  return j.contains(key) && !j[key].is_null() ? std::optional<std::string>(j[key].get<std::string>()) : std::nullopt;
}

// Differences between an episode record and its expected.json entry.
std::vector<std::string> episode_mismatches(const EpisodeRecord& e, const json& want) {
  std::vector<std::string> out;
  auto check = [&](bool ok, const char* field) {
    if (!ok) out.push_back(fmt::format("{}:{}", e.id, field));
  };
  auto same_u = [](const std::optional<Uncertainty>& got, std::optional<double> w) {
    return got.has_value() == w.has_value() && (!w || close_rel(got->value, *w, 1e-12));
  };
  check(e.id == want["id"], "id");
  check(e.answer_source && std::string(to_string(*e.answer_source)) == want["answer_source"], "answer_source");
  check(e.final_answer == opt_string(want, "final_answer"), "final_answer");
  check(e.base_answer == opt_string(want, "base_answer"), "base_answer");
  check(e.tool_answer == opt_string(want, "tool_answer"), "tool_answer");
  check(same_u(e.base_uncertainty, opt_number(want, "base_uncertainty")), "base_uncertainty");
  check(same_u(e.tool_uncertainty, opt_number(want, "tool_uncertainty")), "tool_uncertainty");
  check(e.em_correct == want["em_correct"].get<bool>(), "em_correct");
  check(e.tool_calls == want["tool_calls"].get<std::size_t>(), "tool_calls");
  check(e.output_tokens == want["output_tokens"].get<std::size_t>(), "output_tokens");
  check((!e.decisions.empty() && e.decisions[0].outcome == Outcome::Escalate) == want["base_escalated"].get<bool>(),
        "base_escalated");
  return out;
}

Verdict control_flow() {
  ut::TempDir dir("acceptance-walkthrough");
  const auto r = app::execute_run(ut::walkthrough_config(dir.path()));
  const json want = read_json(ut::fixture_dir() / "walkthrough" / "expected.json")["episodes"];
  if (r.episodes.size() != want.size()) return {false, "episode count differs"};
  std::vector<std::string> bad;
  for (std::size_t i = 0; i < want.size(); ++i) {
    for (auto& m : episode_mismatches(r.episodes[i], want[i])) bad.push_back(std::move(m));
  }
  const auto& a = r.episodes[0];
  const auto& b = r.episodes[1];
  const auto& c = r.episodes[2];
  const bool shape = a.answer_source == AnswerSource::Base && a.tool_calls == 0 &&
                     b.answer_source == AnswerSource::Tool && b.decisions.size() == 2 &&
                     b.decisions[1].outcome == Outcome::Accept && c.answer_source == AnswerSource::Oracle &&
                     c.decisions.size() == 2 && c.decisions[1].outcome == Outcome::Escalate && c.em_correct;
  std::string detail = fmt::format("a: base accept, {} tool calls; b: tool accept; c: double escalation, simulated "
                                   "oracle, em_correct = {}",
                                   a.tool_calls, c.em_correct);
  if (!bad.empty()) detail += fmt::format("; mismatches: {}", fmt::join(bad, " "));
  return {bad.empty() && shape, detail};
}

Verdict accounting() {
  ut::TempDir dir("acceptance-accounting");
  const auto c = ut::hotpot_config(dir.path());
  const auto r = app::execute_run(c);
  app::write_run_outputs(c, r);
  const auto fixture = ut::fixture_dir() / "hotpot-mini-20";
  const bool report_equal =
      ut::read_file(dir.path() / "report.json") == ut::read_file(fixture / "expected-report.json");

  std::set<std::string> with_tools, escalated_first, backoff_null;
  for (const auto& e : r.episodes) {
    if (e.tool_calls > 0) with_tools.insert(e.id);
    if (!e.decisions.empty() && e.decisions[0].outcome == Outcome::Escalate) escalated_first.insert(e.id);
    if (c.backoff && e.base_answer && !e.final_answer) backoff_null.insert(e.id);
  }
  const bool sets_equal = with_tools == escalated_first;
  return {report_equal && sets_equal && backoff_null.empty(),
          fmt::format("report.json {} expected-report.json (EM {:.1f}, {} tool calls, {} output tokens); tool-using "
                      "episodes {} stage-1 escalations ({} vs {}); {} null answers with a base answer under backoff",
                      report_equal ? "==" : "!=", r.report.em, r.report.tool_calls, r.report.output_tokens,
                      sets_equal ? "==" : "!=", with_tools.size(), escalated_first.size(), backoff_null.size())};
}

Verdict statistics() {
  constexpr double kTol = 1e-6;
  double worst = 0.0;
  bool ok = true;
  for (const auto& f : ut::stats_fixtures()) {
    const GroupStats s = compare_groups(f.correct, f.incorrect);
    if (!s.t_statistic || !s.p_value || !s.cohens_d) return {false, f.name + ": missing statistic"};
    for (auto [got, want] : {std::pair{*s.t_statistic, f.t}, {*s.p_value, f.p}, {*s.cohens_d, f.d}}) {
      worst = std::max(worst, std::fabs(got - want));
      ok = ok && std::fabs(got - want) <= kTol;
    }
  }
  const std::vector<double> g{0.12, 0.5, 0.33, 0.91, 0.27};
  const GroupStats same = compare_groups(g, g);
  const std::vector<double> flat{0.4, 0.4, 0.4};
  const GroupStats flat_same = compare_groups(flat, flat);
  const bool zero_d = same.cohens_d == 0.0 && flat_same.cohens_d == 0.0;
  return {ok && zero_d, fmt::format("{} reference fixtures, max |delta| over t, p, d {:.3g} (tol 1e-6); identical "
                                    "groups d = {}",
                                    ut::stats_fixtures().size(), worst, zero_d ? "0" : "nonzero")};
}

Verdict round_trips() {
  struct Source {
    const char* file;
    ToolGrammar grammar;
  };
  // The MMLU exemplar's line 45 carries an observation sentence under an
  // "Action:" label in the source prompt; it is not an action, so the parser
  // must reject it. Every other Action line has to round-trip.
  const std::pair<std::string, std::size_t> known_malformed{"mmlu_react.txt", 45};
  std::size_t total = 0, round_tripped = 0;
  std::vector<std::string> bad;
  bool known_rejected = false;
  for (const Source& s : {Source{"hotpotqa_react.txt", ToolGrammar::Wikipedia},
                          Source{"strategyqa_react.txt", ToolGrammar::Wikipedia},
                          Source{"mmlu_react.txt", ToolGrammar::Web}}) {
    std::istringstream in(ut::read_file(ut::prompt_dir() / s.file));
    std::string line;
    for (std::size_t no = 1; std::getline(in, line); ++no) {
      if (!line.starts_with("Action")) continue;
      ++total;
      const std::string body = line.substr(line.find(':') + 2);
      const bool expected_bad = known_malformed == std::pair<std::string, std::size_t>{s.file, no};
      try {
        const ToolAction a = parse_action(line, s.grammar);
        if (render_action(a, s.grammar) == body && !expected_bad) {
          ++round_tripped;
        } else {
          bad.push_back(fmt::format("{}:{}", s.file, no));
        }
      } catch (const Error& e) {
        if (expected_bad && e.code() == ErrorCode::MalformedAction) {
          known_rejected = true;
        } else {
          bad.push_back(fmt::format("{}:{}", s.file, no));
        }
      }
    }
  }

  auto colorado = [](const char* script, const fs::path& out) {
    const auto dir = ut::fixture_dir() / "colorado";
    app::RunConfig c;
    c.dataset = "hotpotqa";
    c.data = (dir / "items.jsonl").string();
    c.mode = "react";
    c.provider = "scripted";
    c.script = (dir / script).string();
    c.tools = "mock";
    c.corpus = (dir / "corpus.json").string();
    c.prompts = ut::prompt_dir().string();
    c.out_dir = out.string();
    return app::execute_run(c).episodes.at(0);
  };
  ut::TempDir dir("acceptance-colorado");
  const json want = read_json(ut::fixture_dir() / "colorado" / "expected.json");
  const auto ext = colorado("script-extended.jsonl", dir.path());
  const auto verbatim = colorado("script-verbatim.jsonl", dir.path());
  const bool ext_ok = ext.final_answer == want["answer"].get<std::string>() &&
                      ext.tool_calls == want["extended_tool_calls"].get<std::size_t>() && ext.em_correct;

  std::string detail = fmt::format(
      "{}/{} exemplar Action lines round-trip, the remaining one (mmlu_react.txt:45, an observation under an Action "
      "label) rejected as MalformedAction; Colorado episode -> \"{}\" with {} tool calls (verbatim exemplar: {})",
      round_tripped, total, ext.final_answer.value_or("<none>"), ext.tool_calls, verbatim.tool_calls);
  if (!bad.empty()) detail += fmt::format("; failing lines: {}", fmt::join(bad, " "));
  return {bad.empty() && known_rejected && round_tripped + 1 == total && ext_ok, detail};
}

Verdict determinism() {
  ut::TempDir dir("acceptance-determinism");
  const auto out = dir.path() / "run";
  auto c = ut::hotpot_config(out);
  c.workers = 4;
  std::ostringstream sink;
  const std::vector<std::string> files{"trajectory.jsonl", "report.json", "report.txt", "usage.json"};
  std::vector<std::string> first;
  app::cmd_run(c, sink);
  for (const auto& f : files) first.push_back(ut::read_file(out / f));
  fs::remove_all(out);
  app::cmd_run(c, sink);
  std::vector<std::string> differing;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (ut::read_file(out / files[i]) != first[i]) differing.push_back(files[i]);
  }
  return {differing.empty() && !first[0].empty(),
          fmt::format("two cmd_run executions (4 workers): {} of {} output files byte-identical{}",
                      files.size() - differing.size(), files.size(),
                      differing.empty() ? "" : fmt::format(" (differ: {})", fmt::join(differing, " ")))};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);  // keep stdout to one line per criterion
  bool ok = true;
  ok &= report(1, "estimator correctness", estimators);
  ok &= report(2, "algebraic identities", identities);
  ok &= report(3, "monotone-transform routing equivalence", monotone_transform);
  ok &= report(4, "quantile monotonicity", quantile_monotonicity);
  ok &= report(5, "control-flow fidelity", control_flow);
  ok &= report(6, "accounting", accounting);
  ok &= report(7, "statistics", statistics);
  ok &= report(8, "prompt/parse round-trips", round_trips);
  ok &= report(9, "determinism", determinism);
  return ok ? 0 : 1;
}
