// SPDX-License-Identifier: Apache-2.0
#include "uala/llm_gateway.hpp"

#include <algorithm>
#include <thread>

#include <fmt/format.h>

#include "uala/canonical_json.hpp"
#include "uala/error.hpp"

namespace uala {

using nlohmann::json;

std::string_view to_string(FinishReason r) noexcept {
  switch (r) {
    case FinishReason::Stop: return "stop";
    case FinishReason::Length: return "length";
    case FinishReason::Other: return "other";
  }
  return "other";
}

FinishReason finish_reason_from_string(std::string_view s) noexcept {
  if (s == "stop") return FinishReason::Stop;
  if (s == "length") return FinishReason::Length;
  return FinishReason::Other;
}

json completion_to_json(const Completion& c) {
  return {{"text", c.text},
          {"tokens", c.tokens},
          {"token_logprobs", c.token_logprobs},
          {"finish_reason", std::string(to_string(c.finish_reason))}};
}

Completion completion_from_json(const json& j) {
  try {
    Completion c;
    c.text = j.at("text").get<std::string>();
    c.tokens = j.value("tokens", std::vector<std::string>{});
    c.token_logprobs = j.value("token_logprobs", std::vector<double>{});
    c.finish_reason = finish_reason_from_string(j.value("finish_reason", std::string("stop")));
    if (!c.token_logprobs.empty() && c.token_logprobs.size() != c.tokens.size()) {
      throw Error(ErrorCode::ConfigError, "tokens and token_logprobs differ in length");
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, fmt::format("malformed completion record: {}", e.what()));
  }
}

json request_summary(const CompletionRequest& req, std::size_t sample_index) {
  return {{"prompt", req.prompt},
          {"temperature", req.temperature},
          {"max_tokens", req.max_tokens},
          {"stop", req.stop},
          {"sample_index", sample_index}};
}

std::string fingerprint(const CompletionRequest& req, std::size_t sample_index) {
  return sha256_hex(canonical_dump(request_summary(req, sample_index)));
}

// --- scripted ---------------------------------------------------------------

ScriptedProvider::ScriptedProvider(Responder responder) : responder_(std::move(responder)) {}

ScriptedProvider::ScriptedProvider(std::map<std::string, Completion> by_prompt)
    : responder_([table = std::move(by_prompt)](const CompletionRequest& req, std::size_t) -> std::optional<Completion> {
        auto it = table.find(req.prompt);
        if (it == table.end()) return std::nullopt;
        return it->second;
      }) {}

Completion ScriptedProvider::generate(const CompletionRequest& req, std::size_t sample_index) {
  if (auto c = responder_(req, sample_index)) return *c;
  throw FixtureMiss(fingerprint(req, sample_index), "script");
}

// --- replay -----------------------------------------------------------------

ReplayFixture ReplayFixture::load(const std::filesystem::path& path) {
  ReplayFixture fx;
  for (const auto& rec : read_jsonl(path)) {
    try {
      fx.add({rec.at("fingerprint").get<std::string>(), rec.value("request", json::object()),
              completion_from_json(rec)});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigError, fmt::format("{}: {}", path.string(), e.what()));
    }
  }
  return fx;
}

void ReplayFixture::add(ReplayEntry entry) {
  auto key = entry.fingerprint;
  entries_.insert_or_assign(std::move(key), std::move(entry));
}

const Completion* ReplayFixture::find(const std::string& fp) const {
  auto it = entries_.find(fp);
  return it == entries_.end() ? nullptr : &it->second.completion;
}

std::vector<ReplayEntry> ReplayFixture::entries() const {
  std::vector<ReplayEntry> out;
  out.reserve(entries_.size());
  for (const auto& [_, e] : entries_) out.push_back(e);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.fingerprint < b.fingerprint; });
  return out;
}

void ReplayFixture::save(const std::filesystem::path& path) const {
  std::vector<json> records;
  for (const auto& e : entries()) {
    json rec = completion_to_json(e.completion);
    rec["fingerprint"] = e.fingerprint;
    rec["request"] = e.request;
    records.push_back(std::move(rec));
  }
  write_jsonl(path, records);
}

ReplayProvider::ReplayProvider(ReplayFixture fixture) : fixture_(std::move(fixture)) {}

Completion ReplayProvider::generate(const CompletionRequest& req, std::size_t sample_index) {
  const std::string fp = fingerprint(req, sample_index);
  if (const Completion* c = fixture_.find(fp)) return *c;
  throw FixtureMiss(fp);
}

RecordingProvider::RecordingProvider(std::shared_ptr<Provider> inner) : inner_(std::move(inner)) {}

Completion RecordingProvider::generate(const CompletionRequest& req, std::size_t sample_index) {
  Completion c = inner_->generate(req, sample_index);
  std::lock_guard lock(mu_);
  recorded_.add({fingerprint(req, sample_index), request_summary(req, sample_index), c});
  return c;
}

ReplayFixture RecordingProvider::fixture() const {
  std::lock_guard lock(mu_);
  return recorded_;
}

// --- gateway ----------------------------------------------------------------

std::string_view to_string(UsageStage s) noexcept {
  switch (s) {
    case UsageStage::Base: return "base";
    case UsageStage::Sampling: return "sampling";
    case UsageStage::ToolLoop: return "tool-loop";
  }
  return "unknown";
}

json usage_to_json(const UsageReport& u) {
  json stages = json::object();
  for (std::size_t i = 0; i < kUsageStages; ++i) {
    stages[std::string(to_string(static_cast<UsageStage>(i)))] = {
        {"requests", u.per_stage[i].requests}, {"output_tokens", u.per_stage[i].output_tokens}};
  }
  return {{"total_output_tokens", u.total_output_tokens}, {"total_requests", u.total_requests}, {"per_stage", stages}};
}

LlmGateway::LlmGateway(std::shared_ptr<Provider> provider, GatewayOptions options)
    : provider_(std::move(provider)),
      options_(options),
      in_flight_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(options.max_in_flight, 1, 1024))) {
  if (!provider_) throw Error(ErrorCode::ConfigError, "gateway needs a provider");
  if (options_.max_attempts < 1) throw Error(ErrorCode::ConfigError, "max_attempts must be >= 1");
}

Completion LlmGateway::attempt(const CompletionRequest& req, std::size_t sample_index, UsageStage stage) {
  for (int attempt = 1;; ++attempt) {
    try {
      in_flight_.acquire();
      Completion c;
      try {
        c = provider_->generate(req, sample_index);
      } catch (...) {
        in_flight_.release();
        throw;
      }
      in_flight_.release();
      const bool missing = c.token_logprobs.size() != c.tokens.size() || (c.tokens.empty() && !c.text.empty());
      if (req.want_logprobs && missing) {
        throw Error(ErrorCode::CapabilityError, "provider returned no token logprobs");
      }
      const auto s = static_cast<std::size_t>(stage);
      requests_[s].fetch_add(1, std::memory_order_relaxed);
      tokens_[s].fetch_add(c.output_token_count(), std::memory_order_relaxed);
      return c;
    } catch (const TransportError& e) {
      if (attempt >= options_.max_attempts) throw TransportError(e.what(), attempt, e.http_status());
      std::this_thread::sleep_for(options_.backoff_base * (1 << (attempt - 1)));
    }
  }
}

Completion LlmGateway::complete(const CompletionRequest& req, UsageStage stage) { return attempt(req, 0, stage); }

std::vector<Completion> LlmGateway::sample_batch(const CompletionRequest& req, UsageStage stage) {
  if (req.n_samples < 1) throw Error(ErrorCode::ConfigError, "sample_batch needs n_samples >= 1");
  std::vector<Completion> out;
  std::vector<std::size_t> ok;
  std::string first_error;
  for (std::size_t i = 0; i < req.n_samples; ++i) {
    try {
      out.push_back(attempt(req, i, stage));
      ok.push_back(i);
    } catch (const TransportError& e) {
      if (first_error.empty()) first_error = e.what();
    }
  }
  if (ok.size() != req.n_samples) throw PartialBatch(std::move(ok), req.n_samples, first_error);
  return out;
}

UsageReport LlmGateway::usage_report() const {
  UsageReport u;
  for (std::size_t i = 0; i < kUsageStages; ++i) {
    u.per_stage[i] = {requests_[i].load(), tokens_[i].load()};
    u.total_requests += u.per_stage[i].requests;
    u.total_output_tokens += u.per_stage[i].output_tokens;
  }
  return u;
}

}  // namespace uala
