// SPDX-License-Identifier: Apache-2.0
#pragma once

// Escalation API for the oracle console:
//   GET  /api/escalations                  pending escalations, oldest first
//   POST /api/escalations/{id}/answer      {"answer": "..."} -> 204, 404 if not pending
//   GET  /api/runs/current                 {completed, pending, escalated, em_so_far}
// plus static hosting of the built console under "/".

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "uala/agent.hpp"
#include "uala/oracle_queue.hpp"

namespace uala::app {

class StartupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json escalations_json(const OracleQueue& queue);
nlohmann::json progress_json(const RunProgress& progress, const OracleQueue& queue, std::size_t total);

class EscalationServer {
 public:
  EscalationServer(OracleQueue& queue, const RunProgress& progress, std::size_t total,
                   std::filesystem::path console_dir = {});
  ~EscalationServer();
  EscalationServer(const EscalationServer&) = delete;
  EscalationServer& operator=(const EscalationServer&) = delete;

  /// Binds and starts listening on a background thread; port 0 picks a free
  /// port. Returns the bound port. Throws StartupError when binding fails.
  int start(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread listener_;
};

}  // namespace uala::app
