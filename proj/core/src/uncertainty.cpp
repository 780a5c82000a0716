// SPDX-License-Identifier: Apache-2.0
#include "uala/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <regex>

#include <fmt/format.h>

#include "uala/error.hpp"
#include "uala/normalize.hpp"

namespace uala {

namespace {

constexpr double kWeightFloor = 1e-300;

void require_finite(std::span<const double> logprobs) {
  for (double p : logprobs) {
    if (!std::isfinite(p)) {
      throw Error(ErrorCode::InvalidLogprob, fmt::format("non-finite logprob {}", p));
    }
  }
}

void require_logprobs(std::span<const double> logprobs) {
  if (logprobs.empty()) throw Error(ErrorCode::EmptySequence, "answer has no token logprobs");
  require_finite(logprobs);
  for (double p : logprobs) {
    if (p > 0.0) throw Error(ErrorCode::InvalidLogprob, fmt::format("positive logprob {}", p));
  }
}

// -0.0 and sub-ulp negatives collapse to +0.
double non_negative(double v) { return std::max(0.0, v) + 0.0; }

}  // namespace

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::Minimum: return "minimum";
    case Method::Average: return "average";
    case Method::NormalisedProduct: return "normalised-product";
    case Method::LogSum: return "log-sum";
    case Method::Entropy: return "entropy";
    case Method::SingleToken: return "single-token";
    case Method::MultiInference: return "multi-inference";
    case Method::VerbalComplement: return "verbal";
  }
  return "unknown";
}

Method method_from_string(std::string_view name) {
  for (Method m : {Method::Minimum, Method::Average, Method::NormalisedProduct, Method::LogSum,
                   Method::Entropy, Method::SingleToken, Method::MultiInference,
                   Method::VerbalComplement}) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCode::ConfigError, fmt::format("unknown uncertainty method '{}'", name));
}

bool is_free_form(Method m) noexcept {
  switch (m) {
    case Method::Minimum:
    case Method::Average:
    case Method::NormalisedProduct:
    case Method::LogSum:
    case Method::Entropy:
      return true;
    default:
      return false;
  }
}

std::string_view to_string(SoftmaxScope s) noexcept {
  return s == SoftmaxScope::Sequence ? "sequence" : "raw-prob";
}

SoftmaxScope softmax_scope_from_string(std::string_view name) {
  if (name == "sequence") return SoftmaxScope::Sequence;
  if (name == "raw-prob") return SoftmaxScope::RawProb;
  throw Error(ErrorCode::ConfigError, fmt::format("unknown softmax scope '{}'", name));
}

SoftmaxWeights softmax_over_sequence(std::span<const double> logprobs) {
  if (logprobs.empty()) throw Error(ErrorCode::EmptySequence, "softmax over an empty sequence");
  require_finite(logprobs);

  const double shift = *std::max_element(logprobs.begin(), logprobs.end());
  SoftmaxWeights out;
  out.z.reserve(logprobs.size());
  double sum = 0.0;
  for (double p : logprobs) {
    out.z.push_back(std::exp(p - shift));
    sum += out.z.back();
  }
  for (double& z : out.z) z /= sum;
  return out;
}

Uncertainty estimate_free_form(const ScoredAnswer& answer, Method method, SoftmaxScope scope) {
  if (!is_free_form(method)) {
    throw Error(ErrorCode::ConfigError,
                fmt::format("'{}' is not a free-form estimator", to_string(method)));
  }
  require_logprobs(answer.token_logprobs);

  std::vector<double> z;
  if (scope == SoftmaxScope::Sequence) {
    z = softmax_over_sequence(answer.token_logprobs).z;
  } else {
    z.reserve(answer.token_logprobs.size());
    for (double p : answer.token_logprobs) z.push_back(std::exp(p));
  }
  for (double& w : z) w = std::max(w, kWeightFloor);

  const auto n = static_cast<double>(z.size());
  double sum_log = 0.0;
  for (double w : z) sum_log += std::log(w);

  double u = 0.0;
  switch (method) {
    case Method::Minimum:
      u = -std::log(*std::min_element(z.begin(), z.end()));
      break;
    case Method::Average:
      u = -std::log(std::accumulate(z.begin(), z.end(), 0.0) / n);
      break;
    case Method::NormalisedProduct:
      u = -sum_log / n;
      break;
    case Method::LogSum:
      u = -sum_log;
      break;
    case Method::Entropy:
      for (double w : z) u -= w * std::log(w);
      break;
    default:
      break;
  }
  return {non_negative(u), method};
}

Uncertainty estimate_single_token(double logprob) {
  if (!std::isfinite(logprob) || logprob > 0.0) {
    throw Error(ErrorCode::InvalidLogprob, fmt::format("invalid single-token logprob {}", logprob));
  }
  return {non_negative(std::fabs(logprob)), Method::SingleToken};
}

Uncertainty estimate_multi_inference(std::string_view primary, std::span<const std::string> samples,
                                     const AnswerNormalizer& normalizer) {
  if (samples.empty()) throw Error(ErrorCode::EmptySamples, "multi-inference needs at least one sample");
  const auto norm = [&](std::string_view s) {
    return normalizer ? normalizer(s) : normalize_answer(s);
  };
  const std::string reference = norm(primary);
  std::size_t disagreements = 0;
  for (const auto& s : samples) {
    if (norm(s) != reference) ++disagreements;
  }
  return {static_cast<double>(disagreements) / static_cast<double>(samples.size()),
          Method::MultiInference};
}

Uncertainty estimate_multi_inference(std::string_view primary, std::span<const std::optional<std::string>> samples,
                                     const AnswerNormalizer& normalizer) {
  if (samples.empty()) throw Error(ErrorCode::EmptySamples, "multi-inference needs at least one sample");
  const std::string reference = normalizer ? normalizer(primary) : normalize_answer(primary);
  std::size_t disagreements = 0;
  for (const auto& s : samples) {
    if (!s || (normalizer ? normalizer(*s) : normalize_answer(*s)) != reference) ++disagreements;
  }
  return {static_cast<double>(disagreements) / static_cast<double>(samples.size()), Method::MultiInference};
}

double parse_verbal_confidence(std::string_view text) {
  static const std::regex number(R"(^\s*([+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?)\s*$)");

  std::optional<double> found;
  std::size_t close = text.size();
  while (close != 0) {
    close = text.rfind(']', close - 1);
    if (close == std::string_view::npos) break;
    const std::size_t open = text.rfind('[', close);
    if (open == std::string_view::npos) break;
    const std::string inner(text.substr(open + 1, close - open - 1));
    std::smatch m;
    if (std::regex_match(inner, m, number)) {
      found = std::stod(m[1].str());
      break;
    }
    if (close == 0) break;
  }
  if (!found) throw Error(ErrorCode::UnparsableConfidence, "no bracketed probability in completion");
  if (!(*found >= 0.0 && *found <= 1.0)) {
    throw Error(ErrorCode::UnparsableConfidence, fmt::format("confidence {} outside [0, 1]", *found));
  }
  return *found;
}

Uncertainty verbal_uncertainty(std::string_view text) {
  double confidence = 0.0;
  try {
    confidence = parse_verbal_confidence(text);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UnparsableConfidence) throw;
  }
  return {non_negative(1.0 - confidence), Method::VerbalComplement};
}

Uncertainty score_single_inference(const ScoredAnswer& answer, const EstimatorSpec& spec) {
  if (answer.token_logprobs.size() == 1 &&
      (is_free_form(spec.method) || spec.method == Method::SingleToken)) {
    return estimate_single_token(answer.token_logprobs.front());
  }
  if (spec.method == Method::SingleToken) {
    throw Error(ErrorCode::ConfigError,
                fmt::format("single-token estimator given a {}-token answer", answer.token_logprobs.size()));
  }
  return estimate_free_form(answer, spec.method, spec.scope);
}

}  // namespace uala
