// SPDX-License-Identifier: Apache-2.0
#pragma once

// Calibration sets built from correctly answered training questions, the
// acceptance threshold estimated from them, and the correct-vs-incorrect
// statistics used to analyse estimators.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uala/dataset.hpp"
#include "uala/uncertainty.hpp"

namespace uala {

enum class PromptMode { Standard, CoT };

std::string_view to_string(PromptMode m) noexcept;
PromptMode prompt_mode_from_string(std::string_view name);

struct CalibrationEntry {
  std::string question_id;
  std::string answer;
  Uncertainty uncertainty;
};

struct CalibrationSet {
  std::vector<CalibrationEntry> entries;
  PromptMode source = PromptMode::CoT;
  EstimatorSpec estimator;
  std::size_t attempted = 0;  // items run through the base prompt
  std::size_t unscored = 0;   // correct answers whose logprobs could not be scored

  std::vector<double> values() const;
};

/// What the base-prompt runner hands back for one training item. `samples` is
/// only consulted by the multi-inference estimator.
struct BaseAttempt {
  std::optional<ScoredAnswer> answer;
  std::vector<std::optional<std::string>> samples;
};
using BaseAttemptRunner = std::function<BaseAttempt(const QAItem&)>;

/// Runs every item through `runner`, keeps the EM-correct answers and attaches
/// their uncertainty. Throws EmptyCalibrationSet when nothing is kept.
CalibrationSet build_calibration_set(std::span<const QAItem> items, const BaseAttemptRunner& runner,
                                     const EstimatorSpec& estimator, PromptMode source,
                                     std::size_t workers = 1);

enum class ThresholdMethod { Max, Mean, Quantile };

std::string_view to_string(ThresholdMethod m) noexcept;
ThresholdMethod threshold_method_from_string(std::string_view name);

struct ThresholdSpec {
  ThresholdMethod method = ThresholdMethod::Quantile;
  double q = 0.9;
};

struct CalibrationProfile {
  EstimatorSpec estimator;
  ThresholdMethod threshold_method = ThresholdMethod::Quantile;
  double tau = 0.0;
  std::size_t set_size = 0;
  std::optional<double> quantile_q;
  std::string created_at;  // ISO-8601, stamped by the caller
  std::string dataset_id;
};

/// Linear interpolation between order statistics at 1-based rank 1 + q(n-1).
double quantile_linear(std::vector<double> values, double q);

/// Max, Mean or Quantile(q) of the calibration uncertainties.
/// Throws EmptyCalibrationSet, InvalidQuantile (q outside (0,1)).
CalibrationProfile estimate_threshold(const CalibrationSet& cal, const ThresholdSpec& spec);

/// tau = mean of the multi-inference uncertainties.
CalibrationProfile multi_inference_threshold(const CalibrationSet& cal);

nlohmann::json profile_to_json(const CalibrationProfile& p);
CalibrationProfile profile_from_json(const nlohmann::json& j);
void save_profile(const CalibrationProfile& p, const std::filesystem::path& path);
CalibrationProfile load_profile(const std::filesystem::path& path);

nlohmann::json calibration_set_to_json(const CalibrationSet& cal);
CalibrationSet calibration_set_from_json(const nlohmann::json& j);

struct GroupStats {
  std::size_t n_correct = 0;
  std::size_t n_incorrect = 0;
  double mean_correct = 0.0;
  double mean_incorrect = 0.0;
  double mean_diff = 0.0;  // mean(incorrect) - mean(correct)
  // Absent when both groups have zero variance.
  std::optional<double> t_statistic;
  std::optional<double> degrees_of_freedom;
  std::optional<double> p_value;  // two-sided
  std::optional<double> cohens_d;
  bool degenerate_variance = false;
  static constexpr const char* kTest = "welch-t";
  static constexpr const char* kEffectSize = "cohen-d-pooled-sd";
};

/// Welch two-sample t-test and pooled-SD Cohen's d. Throws InsufficientData
/// when either group has fewer than two values.
GroupStats compare_groups(std::span<const double> correct, std::span<const double> incorrect);

nlohmann::json group_stats_to_json(const GroupStats& s);

struct DistributionSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

/// Box-plot ready summary; quartiles use quantile_linear. Throws InsufficientData on empty input.
DistributionSummary summarize(std::span<const double> values);
nlohmann::json summary_to_json(const DistributionSummary& s);

struct SweepOutcome {
  std::size_t escalations = 0;
  double metric = 0.0;
  std::size_t tool_calls = 0;
};
using ProfileEvaluator = std::function<SweepOutcome(const CalibrationProfile&)>;

struct SweepRow {
  double q = 0.0;
  double tau = 0.0;
  SweepOutcome outcome;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  bool escalations_non_increasing = true;
};

/// One Quantile(q) profile per q (ascending, each in (0,1)) evaluated downstream.
SweepTable sweep_quantiles(const CalibrationSet& cal, std::span<const double> qs, const ProfileEvaluator& eval);

struct SizeSweepRow {
  std::size_t size = 0;
  double tau = 0.0;
  SweepOutcome outcome;
};

/// Re-estimates the threshold on deterministic subsets of the calibration set.
std::vector<SizeSweepRow> sweep_calibration_sizes(const CalibrationSet& cal, std::span<const std::size_t> sizes,
                                                  std::uint64_t seed, const ThresholdSpec& spec,
                                                  const ProfileEvaluator& eval);

}  // namespace uala
