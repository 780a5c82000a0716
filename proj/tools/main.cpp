// SPDX-License-Identifier: Apache-2.0
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "app/commands.hpp"
#include "uala/canonical_json.hpp"
#include "uala/error.hpp"

namespace {

using uala::app::RunConfig;

// Named flags are shorthands for --set <key>=<value>.
struct ConfigFlags {
  std::string config_path;
  std::vector<std::string> sets;
  std::map<std::string, std::string> named;
  bool backoff = false;

  void attach(CLI::App& cmd) {
    cmd.add_option("-c,--config", config_path, "RunConfig JSON file")->check(CLI::ExistingFile);
    cmd.add_option("--set", sets, "override any config key: key=value (repeatable)");
    static const std::vector<std::pair<const char*, const char*>> kFlags{
        {"dataset", "hotpotqa | strategyqa | mmlu"},
        {"data", "evaluation items"},
        {"data-format", "canonical | hotpotqa-json | strategyqa-json | mmlu-csv"},
        {"train-data", "calibration items"},
        {"mode", "standard | cot | sc | react | react-backoff | uala-s | uala-m | verbal"},
        {"base-mode", "standard | cot"},
        {"estimator", "minimum | average | normalised-product | log-sum | entropy | multi-inference"},
        {"threshold", "max | mean | quantile"},
        {"q", "quantile for the quantile threshold"},
        {"oracle", "off | simulated | interactive"},
        {"verbal-threshold", "confidence threshold for verbal routing"},
        {"provider", "live | scripted | replay"},
        {"script", "script rules (scripted provider)"},
        {"replay", "replay fixture (replay provider)"},
        {"record", "write every completion to this replay fixture"},
        {"tools", "mock | live | tape"},
        {"corpus", "mock tool corpus"},
        {"tape", "tool tape"},
        {"prompts", "prompt directory"},
        {"profile", "calibration profile"},
        {"calibration-set", "calibration set dump"},
        {"out-dir", "output directory"},
        {"workers", "episode worker threads"},
        {"seed", "sampling seed"},
        {"count", "evaluation items to sample (0: all)"},
        {"k", "samples for self-consistency and multi-inference"},
        {"max-steps", "ReAct step budget"},
    };
    for (const auto& [name, help] : kFlags) cmd.add_option(std::string("--") + name, named[name], help);
    cmd.add_flag("--backoff", backoff, "back off to the base answer when the tool loop gives none");
  }

  RunConfig build(const CLI::App& cmd, bool validate = true) const {
    RunConfig c = config_path.empty() ? RunConfig{} : uala::app::load_config(config_path);
    for (const auto& [name, value] : named) {
      if (cmd.count(std::string("--") + name) == 0) continue;
      std::string key = name;
      for (char& ch : key) ch = ch == '-' ? '_' : ch;
      uala::app::apply_override(c, key + "=" + value);
    }
    if (backoff) c.backoff = true;
    for (const auto& s : sets) uala::app::apply_override(c, s);
    if (validate) uala::app::check(c);
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uala: uncertainty-routed question answering agents"};
  app.require_subcommand(1);
  app.fallthrough();
  spdlog::set_pattern("%^[%l]%$ %v");
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "only warnings and errors on stderr");

  ConfigFlags calibrate_flags, run_flags, sweep_flags, serve_flags, config_flags;
  auto* calibrate = app.add_subcommand("calibrate", "build a calibration set and threshold profile");
  calibrate_flags.attach(*calibrate);
  auto* run = app.add_subcommand("run", "run episodes; write trajectory log and report");
  run_flags.attach(*run);

  auto* sweep = app.add_subcommand("sweep", "re-run under thresholds from several quantiles or set sizes");
  sweep_flags.attach(*sweep);
  std::vector<double> qs;
  std::vector<std::size_t> sizes;
  sweep->add_option("--qs", qs, "quantiles, ascending")->delimiter(',');
  sweep->add_option("--sizes", sizes, "calibration-set sizes")->delimiter(',');

  auto* analyze = app.add_subcommand("analyze", "uncertainty of correct vs incorrect base answers");
  std::vector<std::string> analyze_logs;
  std::string analyze_json;
  analyze->add_option("logs", analyze_logs, "trajectory logs")->required()->check(CLI::ExistingFile);
  analyze->add_option("--json", analyze_json, "write the analysis as JSON");

  auto* report = app.add_subcommand("report", "aggregate trajectory logs");
  std::vector<std::string> report_logs;
  std::string report_json;
  report->add_option("logs", report_logs, "trajectory logs")->required()->check(CLI::ExistingFile);
  report->add_option("--json", report_json, "write the report as JSON");

  auto* serve = app.add_subcommand("serve", "run with the interactive oracle behind the escalation API");
  serve_flags.attach(*serve);
  uala::app::ServeOptions serve_opts;
  std::string console_dir;
  serve->add_option("--host", serve_opts.host, "listen address");
  serve->add_option("--port", serve_opts.port, "listen port (0: any free port)");
  serve->add_option("--console-dir", console_dir, "built console assets to host under /");
  serve->add_flag("--exit-when-done", serve_opts.exit_when_done, "stop serving once the run completes");

  auto* show = app.add_subcommand("config", "print the effective config as canonical JSON");
  config_flags.attach(*show);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? uala::app::kExitOk : uala::app::kExitUsage;
  }
  if (quiet) spdlog::set_level(spdlog::level::warn);

  auto to_paths = [](const std::vector<std::string>& v) { return std::vector<std::filesystem::path>(v.begin(), v.end()); };
  try {
    if (*calibrate) return uala::app::cmd_calibrate(calibrate_flags.build(*calibrate), std::cout);
    if (*run) return uala::app::cmd_run(run_flags.build(*run), std::cout);
    if (*sweep) return uala::app::cmd_sweep(sweep_flags.build(*sweep), qs, sizes, std::cout);
    if (*analyze) return uala::app::cmd_analyze(to_paths(analyze_logs), analyze_json, std::cout);
    if (*report) return uala::app::cmd_report(to_paths(report_logs), report_json, std::cout);
    if (*serve) {
      serve_opts.console_dir = console_dir;
      return uala::app::cmd_serve(serve_flags.build(*serve), serve_opts, std::cout);
    }
    if (*show) {
      std::cout << uala::canonical_dump(uala::app::to_json(config_flags.build(*show, false))) << "\n";
      return uala::app::kExitOk;
    }
  } catch (const uala::Error& e) {
    spdlog::error("{}", e.what());
    return uala::app::exit_code_for(e);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return uala::app::kExitFailure;
  }
  return uala::app::kExitUsage;
}
