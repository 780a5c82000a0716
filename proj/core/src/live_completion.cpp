// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>

#include <fmt/format.h>

#include "http_client.hpp"
#include "uala/error.hpp"
#include "uala/llm_gateway.hpp"

namespace uala {

using nlohmann::json;

namespace {

std::string env_or_empty(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  return v ? v : "";
}

}  // namespace

LiveProvider::LiveProvider(LiveProviderConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) config_.base_url = env_or_empty("UALA_LLM_URL");
  if (config_.base_url.empty()) throw Error(ErrorCode::ConfigError, "live provider: no endpoint (set UALA_LLM_URL)");
  api_key_ = env_or_empty(config_.api_key_env);
}

json LiveProvider::request_body(const CompletionRequest& req, const std::string& model) {
  json body = {{"prompt", req.prompt},
               {"max_tokens", req.max_tokens},
               {"temperature", req.temperature},
               {"n", 1}};
  if (!model.empty()) body["model"] = model;
  if (!req.stop.empty()) body["stop"] = req.stop;
  if (req.want_logprobs) body["logprobs"] = 1;
  return body;
}

Completion LiveProvider::parse_response(const json& body, bool want_logprobs) {
  try {
    const json& choice = body.at("choices").at(0);
    Completion c;
    c.text = choice.at("text").get<std::string>();
    c.finish_reason = finish_reason_from_string(choice.value("finish_reason", std::string("other")));
    const json lp = choice.value("logprobs", json(nullptr));
    if (lp.is_object() && lp.contains("tokens") && lp.contains("token_logprobs")) {
      c.tokens = lp["tokens"].get<std::vector<std::string>>();
      for (const auto& v : lp["token_logprobs"]) c.token_logprobs.push_back(v.is_number() ? v.get<double>() : 0.0);
    }
    if (want_logprobs && (c.tokens.empty() || c.tokens.size() != c.token_logprobs.size())) {
      throw Error(ErrorCode::CapabilityError, "endpoint did not return token logprobs");
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CapabilityError, fmt::format("unexpected completion response: {}", e.what()));
  }
}

Completion LiveProvider::generate(const CompletionRequest& req, std::size_t /*sample_index*/) {
  detail::HttpHeaders headers;
  if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);
  const auto res = detail::http_post_json(config_.base_url, "/v1/completions",
                                          request_body(req, config_.model).dump(), headers, config_.timeout);
  if (res.status == 408 || res.status == 429 || res.status >= 500) {
    throw TransportError(fmt::format("completion endpoint returned HTTP {}", res.status), 1, res.status);
  }
  if (res.status != 200) {
    throw Error(ErrorCode::ConfigError, fmt::format("completion endpoint returned HTTP {}: {}", res.status,
                                                    res.body.substr(0, 200)));
  }
  json body;
  try {
    body = json::parse(res.body);
  } catch (const json::parse_error&) {
    throw TransportError("completion endpoint returned non-JSON body", 1, res.status);
  }
  return parse_response(body, req.want_logprobs);
}

}  // namespace uala
