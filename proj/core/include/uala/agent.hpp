// SPDX-License-Identifier: Apache-2.0
#pragma once

// Episode orchestration: the Standard/CoT/Self-Consistency/ReAct baselines and
// the uncertainty-routed flow (base attempt, tool loop, oracle) with backoff.

#include <atomic>
#include <chrono>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uala/calibration.hpp"
#include "uala/dataset.hpp"
#include "uala/llm_gateway.hpp"
#include "uala/oracle_queue.hpp"
#include "uala/prompts.hpp"
#include "uala/records.hpp"
#include "uala/toolbelt.hpp"
#include "uala/uncertainty.hpp"

namespace uala {

enum class AgentMode { Standard, CoT, SelfConsistency, ReAct, ReActBackoff, UalaS, UalaM, Verbal };
std::string_view to_string(AgentMode m) noexcept;
/// "standard", "cot", "sc", "react", "react-backoff", "uala-s", "uala-m", "verbal".
AgentMode agent_mode_from_string(std::string_view name);

/// CoT for HotpotQA, Standard for StrategyQA and MMLU.
PromptKind default_base_mode(Dataset d) noexcept;
/// Web search for MMLU, Wikipedia otherwise.
ToolGrammar default_grammar(Dataset d) noexcept;

struct AgentConfig {
  Dataset dataset = Dataset::HotpotQA;
  AgentMode mode = AgentMode::UalaS;
  PromptKind base_mode = PromptKind::CoT;  // Standard or CoT
  ToolGrammar grammar = ToolGrammar::Wikipedia;
  std::size_t max_steps = 7;
  std::size_t max_tokens = 256;
  std::size_t k = 9;          // samples for self-consistency and multi-inference
  double temperature = 0.7;   // sampling temperature
  bool backoff = false;
  OracleMode oracle = OracleMode::Off;
  std::chrono::milliseconds oracle_timeout{std::chrono::minutes(30)};
  std::optional<CalibrationProfile> profile;  // uala-s / uala-m
  std::optional<double> verbal_threshold;     // verbal, in (0, 1)
};

/// Throws ConfigError for inconsistent settings (missing profile, estimator
/// not matching the mode, oracle with verbal routing, k = 0, ...).
void validate(const AgentConfig& c);

struct BaseOutcome {
  std::optional<ScoredAnswer> answer;  // absent when extraction failed
  Completion completion;
  std::string prompt;
};

struct SelfConsistencyOutcome {
  std::optional<std::string> answer;
  std::vector<std::optional<std::string>> samples;
  std::size_t output_tokens = 0;
};

struct ReactOutcome {
  std::optional<ScoredAnswer> answer;  // absent on exhaustion or empty Finish
  std::vector<TrajectoryStep> steps;
  std::size_t tool_calls = 0;
  std::size_t output_tokens = 0;
  bool finished = false;
  std::optional<CompletionRequest> finish_request;  // the request whose output held the Finish
};

/// Majority over comparison keys; ties go to the class sampled first. The
/// returned answer is the first sample of the winning class. Throws
/// AnswerExtractionFailure when every sample is absent.
std::string majority_vote(Dataset d, std::span<const std::optional<std::string>> samples);

/// Answer text of a verbalised-confidence completion, with the trailing
/// "[probability]" removed.
ScoredAnswer extract_verbal_answer(const Completion& c);

/// Live progress shared with the escalation API.
struct RunProgress {
  std::atomic<std::size_t> completed{0};
  std::atomic<std::size_t> escalated{0};  // episodes sent to the oracle stage
  std::atomic<std::size_t> correct{0};
};

class Agent {
 public:
  Agent(LlmGateway& llm, ToolEnvironment& tools, const PromptLibrary& prompts, AgentConfig config,
        OracleQueue* queue = nullptr);

  const AgentConfig& config() const noexcept { return config_; }

  BaseOutcome run_base(const QAItem& item, PromptKind kind);
  BaseOutcome run_standard(const QAItem& item) { return run_base(item, PromptKind::Standard); }
  BaseOutcome run_cot(const QAItem& item) { return run_base(item, PromptKind::CoT); }
  SelfConsistencyOutcome run_self_consistency(const QAItem& item);
  ReactOutcome run_react(const QAItem& item);

  /// Runs one episode in the configured mode.
  EpisodeRecord run_episode(const QAItem& item);

  /// Base-prompt attempt for calibration; samples are drawn only when
  /// `with_samples` (the multi-inference estimator needs them).
  BaseAttempt calibration_attempt(const QAItem& item, PromptKind kind, bool with_samples);

 private:
  struct Sampled {
    std::vector<std::optional<std::string>> answers;
    std::size_t output_tokens = 0;
  };
  template <class Extract>
  Sampled resample(CompletionRequest req, Extract&& extract);
  std::optional<Uncertainty> score(const ScoredAnswer& a, const std::optional<Sampled>& samples) const;

  EpisodeRecord routed_episode(const QAItem& item);
  EpisodeRecord baseline_episode(const QAItem& item);
  void resolve_after_tool(EpisodeRecord& rec, const QAItem& item, double tau);

  LlmGateway& llm_;
  ToolEnvironment& tools_;
  const PromptLibrary& prompts_;
  AgentConfig config_;
  OracleQueue* queue_;
};

/// Runs `items` on `workers` threads; records come back in item order.
std::vector<EpisodeRecord> run_episodes(Agent& agent, std::span<const QAItem> items, std::size_t workers,
                                        RunProgress* progress = nullptr);

}  // namespace uala
