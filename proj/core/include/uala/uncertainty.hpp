// SPDX-License-Identifier: Apache-2.0
#pragma once

// Answer uncertainty from token log-probabilities (single inference) or from
// agreement among sampled answers (multi inference). All functions are pure.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace uala {

/// An extracted answer together with the chosen-token log-probabilities of
/// the tokens that make up the answer span.
struct ScoredAnswer {
  std::string text;
  std::vector<std::string> tokens;
  std::vector<double> token_logprobs;  // natural log, each <= 0
};

enum class Method {
  Minimum,
  Average,
  NormalisedProduct,
  LogSum,
  Entropy,
  SingleToken,
  MultiInference,
  VerbalComplement,
};

std::string_view to_string(Method m) noexcept;
/// Accepts the canonical names ("entropy", "log-sum", ...). Throws ConfigError.
Method method_from_string(std::string_view name);
bool is_free_form(Method m) noexcept;

struct Uncertainty {
  double value = 0.0;
  Method method = Method::Entropy;

  friend bool operator==(const Uncertainty&, const Uncertainty&) = default;
};

/// How the per-token weights z_i are formed before a free-form formula is applied.
///   Sequence: softmax over the answer's own logprobs (the literal rule; makes
///             Average constant at ln n).
///   RawProb:  z_i = exp(p_i) with no normalisation. Not the published rule;
///             offered for users who want a non-degenerate Average.
enum class SoftmaxScope { Sequence, RawProb };

std::string_view to_string(SoftmaxScope s) noexcept;
SoftmaxScope softmax_scope_from_string(std::string_view name);

struct SoftmaxWeights {
  std::vector<double> z;
};

/// Numerically stable softmax (max subtracted before exponentiation).
/// Throws EmptySequence / InvalidLogprob (NaN or infinite input).
SoftmaxWeights softmax_over_sequence(std::span<const double> logprobs);

/// Applies one of the five free-form formulas (Minimum, Average,
/// NormalisedProduct, LogSum, Entropy). Natural log; z clamped to >= 1e-300.
Uncertainty estimate_free_form(const ScoredAnswer& answer, Method method,
                               SoftmaxScope scope = SoftmaxScope::Sequence);

/// u = |p| for one-token answers; no softmax.
Uncertainty estimate_single_token(double logprob);

using AnswerNormalizer = std::function<std::string(std::string_view)>;

/// Fraction of samples whose normalised form differs from the normalised
/// primary answer. Defaults to the exact-match normaliser.
Uncertainty estimate_multi_inference(std::string_view primary,
                                     std::span<const std::string> samples,
                                     const AnswerNormalizer& normalizer = {});

/// As above; an absent sample (no extractable answer) counts as a disagreement.
Uncertainty estimate_multi_inference(std::string_view primary,
                                     std::span<const std::optional<std::string>> samples,
                                     const AnswerNormalizer& normalizer = {});

/// Extracts the bracketed probability from "Answer[0.8]"-style output.
/// The last bracket holding a bare number wins. Throws UnparsableConfidence
/// when no such bracket exists or the value is outside [0, 1].
double parse_verbal_confidence(std::string_view completion_text);

/// 1 - confidence; an unparsable completion counts as confidence 0.
Uncertainty verbal_uncertainty(std::string_view completion_text);

/// Estimator selection shared by calibration and routing.
struct EstimatorSpec {
  Method method = Method::Entropy;
  SoftmaxScope scope = SoftmaxScope::Sequence;
};

/// Scores an answer with a single-inference estimator. Answers whose span is a
/// single token take the |p| path regardless of the configured free-form
/// method; the returned Uncertainty::method records which path fired.
Uncertainty score_single_inference(const ScoredAnswer& answer, const EstimatorSpec& spec);

}  // namespace uala
