// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace uala {

/// One episode parked on the human oracle. `payload` is what the escalation
/// API serves (question, both answers and uncertainties, trajectory).
struct Escalation {
  std::string episode_id;
  nlohmann::json payload;
  std::uint64_t sequence = 0;  // escalation order
};

/// Many episode workers park here; the HTTP handler answers them.
class OracleQueue {
 public:
  /// Registers the escalation; a duplicate id replaces the earlier payload.
  void enqueue(std::string episode_id, nlohmann::json payload);

  /// Blocks until submit() answers `episode_id` or the timeout passes. The
  /// escalation leaves the pending list either way.
  std::optional<std::string> wait(const std::string& episode_id, std::chrono::milliseconds timeout);

  /// false when the id is not pending (already answered, timed out, unknown).
  bool submit(const std::string& episode_id, std::string answer);

  /// Pending escalations ordered by escalation time.
  std::vector<Escalation> pending() const;
  std::size_t size() const;

 private:
  struct Slot {
    Escalation escalation;
    std::optional<std::string> answer;
  };

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::string, Slot> slots_;
  std::uint64_t next_sequence_ = 0;
};

}  // namespace uala
