// SPDX-License-Identifier: Apache-2.0
#include "uala/oracle_queue.hpp"

#include <algorithm>

namespace uala {

void OracleQueue::enqueue(std::string episode_id, nlohmann::json payload) {
  std::lock_guard lock(mu_);
  Slot slot{{episode_id, std::move(payload), next_sequence_++}, std::nullopt};
  slots_.insert_or_assign(std::move(episode_id), std::move(slot));
}

std::optional<std::string> OracleQueue::wait(const std::string& episode_id, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  auto ready = [&] {
    auto it = slots_.find(episode_id);
    return it == slots_.end() || it->second.answer.has_value();
  };
  cv_.wait_for(lock, timeout, ready);
  auto it = slots_.find(episode_id);
  if (it == slots_.end()) return std::nullopt;
  std::optional<std::string> answer = std::move(it->second.answer);
  slots_.erase(it);
  return answer;
}

bool OracleQueue::submit(const std::string& episode_id, std::string answer) {
  {
    std::lock_guard lock(mu_);
    auto it = slots_.find(episode_id);
    if (it == slots_.end() || it->second.answer) return false;
    it->second.answer = std::move(answer);
  }
  cv_.notify_all();
  return true;
}

std::vector<Escalation> OracleQueue::pending() const {
  std::lock_guard lock(mu_);
  std::vector<Escalation> out;
  for (const auto& [_, slot] : slots_) {
    if (!slot.answer) out.push_back(slot.escalation);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.sequence < b.sequence; });
  return out;
}

std::size_t OracleQueue::size() const {
  std::lock_guard lock(mu_);
  return std::count_if(slots_.begin(), slots_.end(), [](const auto& kv) { return !kv.second.answer; });
}

}  // namespace uala
