// SPDX-License-Identifier: Apache-2.0
#include "uala/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "uala/error.hpp"
#include "uala/parallel.hpp"

namespace uala {

using nlohmann::json;

namespace {

constexpr const char* kProfileFormat = "uala.calibration-profile/1";
constexpr const char* kSetFormat = "uala.calibration-set/1";

void require_non_empty(const CalibrationSet& cal) {
  if (cal.entries.empty()) throw Error(ErrorCode::EmptyCalibrationSet, "calibration set is empty");
}

void require_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) throw Error(ErrorCode::InvalidQuantile, fmt::format("quantile {} outside (0, 1)", q));
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

}  // namespace

std::string_view to_string(PromptMode m) noexcept { return m == PromptMode::Standard ? "standard" : "cot"; }

PromptMode prompt_mode_from_string(std::string_view name) {
  if (name == "standard") return PromptMode::Standard;
  if (name == "cot") return PromptMode::CoT;
  throw Error(ErrorCode::ConfigError, fmt::format("unknown base prompt mode '{}'", name));
}

std::string_view to_string(ThresholdMethod m) noexcept {
  switch (m) {
    case ThresholdMethod::Max: return "max";
    case ThresholdMethod::Mean: return "mean";
    case ThresholdMethod::Quantile: return "quantile";
  }
  return "unknown";
}

ThresholdMethod threshold_method_from_string(std::string_view name) {
  if (name == "max") return ThresholdMethod::Max;
  if (name == "mean") return ThresholdMethod::Mean;
  if (name == "quantile") return ThresholdMethod::Quantile;
  throw Error(ErrorCode::ConfigError, fmt::format("unknown threshold method '{}'", name));
}

std::vector<double> CalibrationSet::values() const {
  std::vector<double> v;
  v.reserve(entries.size());
  for (const auto& e : entries) v.push_back(e.uncertainty.value);
  return v;
}

CalibrationSet build_calibration_set(std::span<const QAItem> items, const BaseAttemptRunner& runner,
                                     const EstimatorSpec& estimator, PromptMode source, std::size_t workers) {
  std::vector<BaseAttempt> attempts(items.size());
  parallel_for(items.size(), workers, [&](std::size_t i) { attempts[i] = runner(items[i]); });

  CalibrationSet cal;
  cal.source = source;
  cal.estimator = estimator;
  cal.attempted = items.size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& attempt = attempts[i];
    if (!attempt.answer) continue;
    if (!answers_match(items[i].dataset, attempt.answer->text, items[i].gold)) continue;
    try {
      const Uncertainty u = estimator.method == Method::MultiInference
                                ? estimate_multi_inference(attempt.answer->text, attempt.samples,
                                                           [d = items[i].dataset](std::string_view s) {
                                                             return comparison_key(d, s);
                                                           })
                                : score_single_inference(*attempt.answer, estimator);
      cal.entries.push_back({items[i].id, attempt.answer->text, u});
    } catch (const Error& e) {
      switch (e.code()) {
        case ErrorCode::EmptySequence:
        case ErrorCode::InvalidLogprob:
        case ErrorCode::EmptySamples:
          ++cal.unscored;
          break;
        default:
          throw;
      }
    }
  }
  require_non_empty(cal);
  return cal;
}

double quantile_linear(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::EmptyCalibrationSet, "quantile of an empty set");
  if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorCode::InvalidQuantile, fmt::format("quantile {} outside [0, 1]", q));
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

CalibrationProfile estimate_threshold(const CalibrationSet& cal, const ThresholdSpec& spec) {
  require_non_empty(cal);
  const std::vector<double> v = cal.values();

  CalibrationProfile p;
  p.estimator = cal.estimator;
  p.threshold_method = spec.method;
  p.set_size = v.size();
  switch (spec.method) {
    case ThresholdMethod::Max:
      p.tau = *std::max_element(v.begin(), v.end());
      break;
    case ThresholdMethod::Mean:
      p.tau = mean_of(v);
      break;
    case ThresholdMethod::Quantile:
      require_quantile(spec.q);
      p.tau = quantile_linear(v, spec.q);
      p.quantile_q = spec.q;
      break;
  }
  return p;
}

CalibrationProfile multi_inference_threshold(const CalibrationSet& cal) {
  if (cal.estimator.method != Method::MultiInference) {
    throw Error(ErrorCode::ConfigError, "multi-inference threshold needs multi-inference uncertainties");
  }
  return estimate_threshold(cal, {ThresholdMethod::Mean, 0.0});
}

json profile_to_json(const CalibrationProfile& p) {
  json j = {
      {"format", kProfileFormat},
      {"estimator", std::string(to_string(p.estimator.method))},
      {"softmax_scope", std::string(to_string(p.estimator.scope))},
      {"threshold_method", std::string(to_string(p.threshold_method))},
      {"tau", p.tau},
      {"set_size", p.set_size},
      {"created_at", p.created_at},
      {"dataset_id", p.dataset_id},
  };
  j["quantile_q"] = p.quantile_q ? json(*p.quantile_q) : json(nullptr);
  return j;
}

CalibrationProfile profile_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != kProfileFormat) {
      throw Error(ErrorCode::ConfigError, "not a calibration profile record");
    }
    CalibrationProfile p;
    p.estimator.method = method_from_string(j.at("estimator").get<std::string>());
    p.estimator.scope = softmax_scope_from_string(j.value("softmax_scope", std::string("sequence")));
    p.threshold_method = threshold_method_from_string(j.at("threshold_method").get<std::string>());
    p.tau = j.at("tau").get<double>();
    p.set_size = j.at("set_size").get<std::size_t>();
    p.created_at = j.value("created_at", std::string());
    p.dataset_id = j.value("dataset_id", std::string());
    if (j.contains("quantile_q") && !j["quantile_q"].is_null()) p.quantile_q = j["quantile_q"].get<double>();
    if (p.tau < 0.0) throw Error(ErrorCode::ConfigError, "profile tau must be >= 0");
    if (p.threshold_method == ThresholdMethod::Quantile) {
      if (!p.quantile_q) throw Error(ErrorCode::ConfigError, "quantile profile without quantile_q");
      require_quantile(*p.quantile_q);
    }
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, fmt::format("malformed calibration profile: {}", e.what()));
  }
}

void save_profile(const CalibrationProfile& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, fmt::format("cannot write {}", path.string()));
  out << profile_to_json(p).dump() << '\n';
}

CalibrationProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, fmt::format("cannot open {}", path.string()));
  try {
    return profile_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, fmt::format("{}: {}", path.string(), e.what()));
  }
}

json calibration_set_to_json(const CalibrationSet& cal) {
  json entries = json::array();
  for (const auto& e : cal.entries) {
    entries.push_back({{"question_id", e.question_id},
                       {"answer", e.answer},
                       {"uncertainty", e.uncertainty.value},
                       {"method", std::string(to_string(e.uncertainty.method))}});
  }
  return {{"format", kSetFormat},
          {"source", std::string(to_string(cal.source))},
          {"estimator", std::string(to_string(cal.estimator.method))},
          {"softmax_scope", std::string(to_string(cal.estimator.scope))},
          {"attempted", cal.attempted},
          {"unscored", cal.unscored},
          {"entries", std::move(entries)}};
}

CalibrationSet calibration_set_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != kSetFormat) {
      throw Error(ErrorCode::ConfigError, "not a calibration set record");
    }
    CalibrationSet cal;
    cal.source = prompt_mode_from_string(j.at("source").get<std::string>());
    cal.estimator.method = method_from_string(j.at("estimator").get<std::string>());
    cal.estimator.scope = softmax_scope_from_string(j.value("softmax_scope", std::string("sequence")));
    cal.attempted = j.value("attempted", std::size_t{0});
    cal.unscored = j.value("unscored", std::size_t{0});
    for (const auto& e : j.at("entries")) {
      const double u = e.at("uncertainty").get<double>();
      if (!std::isfinite(u) || u < 0.0) throw Error(ErrorCode::ConfigError, "calibration uncertainty must be finite and >= 0");
      cal.entries.push_back({e.at("question_id").get<std::string>(), e.at("answer").get<std::string>(),
                             {u, method_from_string(e.at("method").get<std::string>())}});
    }
    return cal;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, fmt::format("malformed calibration set: {}", e.what()));
  }
}

DistributionSummary summarize(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::InsufficientData, "cannot summarise an empty group");
  std::vector<double> v(values.begin(), values.end());
  DistributionSummary s;
  s.n = v.size();
  s.mean = mean_of(v);
  s.sd = v.size() > 1 ? std::sqrt(sample_variance(v, s.mean)) : 0.0;
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  s.q1 = quantile_linear(v, 0.25);
  s.median = quantile_linear(v, 0.5);
  s.q3 = quantile_linear(v, 0.75);
  return s;
}

json summary_to_json(const DistributionSummary& s) {
  return {{"n", s.n},   {"mean", s.mean},     {"sd", s.sd}, {"min", s.min},
          {"q1", s.q1}, {"median", s.median}, {"q3", s.q3}, {"max", s.max}};
}

SweepTable sweep_quantiles(const CalibrationSet& cal, std::span<const double> qs, const ProfileEvaluator& eval) {
  for (std::size_t i = 0; i < qs.size(); ++i) {
    require_quantile(qs[i]);
    if (i > 0 && qs[i] < qs[i - 1]) throw Error(ErrorCode::InvalidQuantile, "quantiles must be sorted ascending");
  }
  SweepTable table;
  for (double q : qs) {
    const CalibrationProfile profile = estimate_threshold(cal, {ThresholdMethod::Quantile, q});
    SweepRow row{q, profile.tau, eval(profile)};
    if (!table.rows.empty() && row.outcome.escalations > table.rows.back().outcome.escalations) {
      table.escalations_non_increasing = false;
    }
    table.rows.push_back(row);
  }
  return table;
}

std::vector<SizeSweepRow> sweep_calibration_sizes(const CalibrationSet& cal, std::span<const std::size_t> sizes,
                                                  std::uint64_t seed, const ThresholdSpec& spec,
                                                  const ProfileEvaluator& eval) {
  require_non_empty(cal);
  std::vector<SizeSweepRow> rows;
  for (std::size_t size : sizes) {
    CalibrationSet subset = cal;
    subset.entries.clear();
    for (std::size_t pick : sample_indices(cal.entries.size(), size, seed)) subset.entries.push_back(cal.entries[pick]);
    const CalibrationProfile profile = estimate_threshold(subset, spec);
    rows.push_back({subset.entries.size(), profile.tau, eval(profile)});
  }
  return rows;
}

}  // namespace uala
