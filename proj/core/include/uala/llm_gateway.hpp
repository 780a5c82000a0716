// SPDX-License-Identifier: Apache-2.0
#pragma once

// Completion backends behind one interface: live HTTP, scripted responders and
// record/replay fixtures, plus retry, in-flight limiting and token accounting.

#include <array>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace uala {

struct CompletionRequest {
  std::string prompt;
  std::size_t max_tokens = 256;
  double temperature = 0.0;
  std::size_t n_samples = 1;
  std::vector<std::string> stop;
  bool want_logprobs = true;
};

enum class FinishReason { Stop, Length, Other };

std::string_view to_string(FinishReason r) noexcept;
FinishReason finish_reason_from_string(std::string_view s) noexcept;

struct Completion {
  std::string text;
  std::vector<std::string> tokens;
  std::vector<double> token_logprobs;  // aligned with tokens when requested
  FinishReason finish_reason = FinishReason::Stop;

  std::size_t output_token_count() const noexcept { return tokens.size(); }
  bool operator==(const Completion&) const = default;
};

nlohmann::json completion_to_json(const Completion& c);
Completion completion_from_json(const nlohmann::json& j);

/// Subset of the request that determines the output, in canonical form.
nlohmann::json request_summary(const CompletionRequest& req, std::size_t sample_index);

/// SHA-256 over the canonical request summary; the replay key.
std::string fingerprint(const CompletionRequest& req, std::size_t sample_index);

class Provider {
 public:
  virtual ~Provider() = default;
  /// One completion for sample `sample_index` of the request (0 for greedy).
  virtual Completion generate(const CompletionRequest& req, std::size_t sample_index) = 0;
};

/// Canned responses chosen by a responder; std::nullopt means "not scripted"
/// and surfaces as FixtureMiss keyed by the request fingerprint.
class ScriptedProvider : public Provider {
 public:
  using Responder = std::function<std::optional<Completion>(const CompletionRequest&, std::size_t)>;

  explicit ScriptedProvider(Responder responder);
  /// Keyed by the exact prompt; sample_index is ignored.
  explicit ScriptedProvider(std::map<std::string, Completion> by_prompt);

  Completion generate(const CompletionRequest& req, std::size_t sample_index) override;

 private:
  Responder responder_;
};

struct ReplayEntry {
  std::string fingerprint;
  nlohmann::json request;
  Completion completion;
};

class ReplayFixture {
 public:
  static ReplayFixture load(const std::filesystem::path& path);
  /// Entries sorted by fingerprint, one canonical JSON record per line.
  void save(const std::filesystem::path& path) const;

  void add(ReplayEntry entry);
  const Completion* find(const std::string& fp) const;
  std::size_t size() const noexcept { return entries_.size(); }
  std::vector<ReplayEntry> entries() const;

 private:
  std::unordered_map<std::string, ReplayEntry> entries_;
};

class ReplayProvider : public Provider {
 public:
  explicit ReplayProvider(ReplayFixture fixture);
  Completion generate(const CompletionRequest& req, std::size_t sample_index) override;

 private:
  ReplayFixture fixture_;
};

/// Forwards to an inner provider and keeps every exchange for later save().
class RecordingProvider : public Provider {
 public:
  explicit RecordingProvider(std::shared_ptr<Provider> inner);
  Completion generate(const CompletionRequest& req, std::size_t sample_index) override;
  ReplayFixture fixture() const;

 private:
  std::shared_ptr<Provider> inner_;
  mutable std::mutex mu_;
  ReplayFixture recorded_;
};

/// OpenAI-style text-completion endpoint: POST {base_url}/v1/completions.
struct LiveProviderConfig {
  std::string base_url;  // empty: taken from UALA_LLM_URL
  std::string model;
  std::chrono::seconds timeout{60};
  std::string api_key_env = "UALA_LLM_API_KEY";
};

class LiveProvider : public Provider {
 public:
  explicit LiveProvider(LiveProviderConfig config);
  Completion generate(const CompletionRequest& req, std::size_t sample_index) override;

  /// Request body sent for `req`; exposed so the wire format is testable offline.
  static nlohmann::json request_body(const CompletionRequest& req, const std::string& model);
  /// Parses a response body. Throws CapabilityError when logprobs were wanted but are missing.
  static Completion parse_response(const nlohmann::json& body, bool want_logprobs);

 private:
  LiveProviderConfig config_;
  std::string api_key_;
};

enum class UsageStage { Base, Sampling, ToolLoop };
inline constexpr std::size_t kUsageStages = 3;

std::string_view to_string(UsageStage s) noexcept;

struct StageUsage {
  std::size_t requests = 0;
  std::size_t output_tokens = 0;
};

struct UsageReport {
  std::size_t total_output_tokens = 0;
  std::size_t total_requests = 0;
  std::array<StageUsage, kUsageStages> per_stage{};

  const StageUsage& stage(UsageStage s) const { return per_stage[static_cast<std::size_t>(s)]; }
};

nlohmann::json usage_to_json(const UsageReport& u);

struct GatewayOptions {
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{250};
  std::size_t max_in_flight = 4;
};

class LlmGateway {
 public:
  explicit LlmGateway(std::shared_ptr<Provider> provider, GatewayOptions options = {});

  /// Greedy/single completion (sample index 0).
  Completion complete(const CompletionRequest& req, UsageStage stage);
  /// req.n_samples completions with sample indices 0..k-1, order preserved.
  /// Transport failures on some samples surface as PartialBatch.
  std::vector<Completion> sample_batch(const CompletionRequest& req, UsageStage stage);

  UsageReport usage_report() const;

 private:
  Completion attempt(const CompletionRequest& req, std::size_t sample_index, UsageStage stage);

  std::shared_ptr<Provider> provider_;
  GatewayOptions options_;
  std::counting_semaphore<1024> in_flight_;
  std::array<std::atomic<std::size_t>, kUsageStages> requests_{};
  std::array<std::atomic<std::size_t>, kUsageStages> tokens_{};
};

}  // namespace uala
