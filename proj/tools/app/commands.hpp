// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <memory>
#include <ostream>
#include <vector>

#include "config.hpp"
#include "uala/agent.hpp"
#include "uala/error.hpp"
#include "uala/report.hpp"

namespace uala::app {

/// Process exit codes; documented in docs/interface.md.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,        // anything not listed below
  kExitUsage = 2,          // bad flags or inconsistent config
  kExitData = 3,           // dataset, fixture or log files unreadable or malformed
  kExitFixtureMiss = 4,    // replay/script/tape has no entry for a request
  kExitProvider = 5,       // transport, capability or partial-batch failures
  kExitInsufficient = 6,   // empty calibration set, too little data to analyse
  kExitStartup = 7,        // serve could not bind its port
};

int exit_code_for(const Error& e) noexcept;

/// Everything a run needs, built from a RunConfig.
class Environment {
 public:
  explicit Environment(const RunConfig& config);
  Environment(const Environment&) = delete;
  Environment& operator=(const Environment&) = delete;

  Dataset dataset() const noexcept { return dataset_; }
  const PromptLibrary& prompts() const noexcept { return prompts_; }
  LlmGateway& llm() noexcept { return *llm_; }
  ToolEnvironment& tools() noexcept { return tools_; }

  /// Writes the recorded replay fixture and tool tape, when recording.
  void save_recordings() const;

 private:
  RunConfig config_;
  Dataset dataset_;
  PromptLibrary prompts_;
  std::shared_ptr<RecordingProvider> recorder_;
  std::unique_ptr<LlmGateway> llm_;
  ToolEnvironment tools_;
  std::shared_ptr<ToolTape> tape_;
  bool record_tape_ = false;
};

AgentConfig agent_config(const RunConfig& c, std::optional<CalibrationProfile> profile);

std::vector<QAItem> load_items(const RunConfig& c, bool train);

struct RunResult {
  std::vector<EpisodeRecord> episodes;
  RunReport report;
  UsageReport usage;
  std::size_t tool_usage = 0;
};

/// Runs the configured episodes. Uala modes load the profile from c.profile
/// unless one is passed in.
RunResult execute_run(const RunConfig& c, std::optional<CalibrationProfile> profile = std::nullopt,
                      OracleQueue* queue = nullptr, RunProgress* progress = nullptr);

/// Writes trajectory.jsonl, report.json, report.txt and usage.json to out_dir.
void write_run_outputs(const RunConfig& c, const RunResult& r);

int cmd_calibrate(const RunConfig& c, std::ostream& out);
int cmd_run(const RunConfig& c, std::ostream& out);
int cmd_sweep(const RunConfig& c, const std::vector<double>& qs, const std::vector<std::size_t>& sizes,
              std::ostream& out);
int cmd_analyze(const std::vector<std::filesystem::path>& logs, const std::filesystem::path& json_out,
                std::ostream& out);
int cmd_report(const std::vector<std::filesystem::path>& logs, const std::filesystem::path& json_out,
               std::ostream& out);

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path console_dir;
  bool exit_when_done = false;
};
int cmd_serve(const RunConfig& c, const ServeOptions& opts, std::ostream& out);

}  // namespace uala::app
