// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <chrono>
#include <csignal>
#include <ctime>
#include <fstream>
#include <map>
#include <thread>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "server.hpp"
#include "uala/calibration.hpp"
#include "uala/canonical_json.hpp"
#include "uala/error.hpp"
#include "uala/script_book.hpp"

namespace uala::app {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

fs::path out_path(const RunConfig& c, const std::string& explicit_path, std::string_view default_name) {
  return explicit_path.empty() ? fs::path(c.out_dir) / default_name : fs::path(explicit_path);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, fmt::format("cannot write {}", path.string()));
  out << text;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, fmt::format("cannot open {}", path.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::IoError, fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(t));
}

PromptKind base_kind(const RunConfig& c) {
  return c.base_mode.empty() ? default_base_mode(dataset_from_string(c.dataset)) : prompt_kind_from_string(c.base_mode);
}

bool is_routed(AgentMode m) { return m == AgentMode::UalaS || m == AgentMode::UalaM; }

}  // namespace

int exit_code_for(const Error& e) noexcept {
  switch (e.code()) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidQuantile:
      return kExitUsage;
    case ErrorCode::DatasetFormatError:
    case ErrorCode::IoError:
      return kExitData;
    case ErrorCode::FixtureMiss:
      return kExitFixtureMiss;
    case ErrorCode::TransportError:
    case ErrorCode::CapabilityError:
    case ErrorCode::PartialBatch:
    case ErrorCode::ToolTransportError:
      return kExitProvider;
    case ErrorCode::EmptyCalibrationSet:
    case ErrorCode::InsufficientData:
      return kExitInsufficient;
    default:
      return kExitFailure;
  }
}

Environment::Environment(const RunConfig& config)
    : config_(config),
      dataset_(dataset_from_string(config.dataset)),
      prompts_(PromptLibrary::load(config.prompts.empty() ? default_prompt_dir() : fs::path(config.prompts))) {
  check(config_);
  std::shared_ptr<Provider> provider;
  if (config_.provider == "replay") {
    provider = std::make_shared<ReplayProvider>(ReplayFixture::load(config_.replay));
  } else if (config_.provider == "scripted") {
    provider = std::make_shared<ScriptBook>(ScriptBook::load(config_.script, prompts_, dataset_));
  } else {
    LiveProviderConfig live;
    live.base_url = config_.llm_url;
    live.model = config_.llm_model;
    provider = std::make_shared<LiveProvider>(live);
  }
  if (!config_.record.empty()) {
    recorder_ = std::make_shared<RecordingProvider>(provider);
    provider = recorder_;
  }
  GatewayOptions options;
  options.max_in_flight = config_.max_in_flight;
  llm_ = std::make_unique<LlmGateway>(provider, options);

  const bool web = default_grammar(dataset_) == ToolGrammar::Web;
  if (config_.tools == "mock") {
    MockCorpus corpus = load_mock_corpus(config_.corpus);
    tools_.wiki = corpus.wiki;
    tools_.web = corpus.web;
  } else if (config_.tools == "tape") {
    tape_ = ToolTape::load(config_.tape);
    tools_.wiki = std::make_shared<TapeWikiBackend>(tape_);
    tools_.web = std::make_shared<TapeWebBackend>(tape_);
  } else {
    std::shared_ptr<WikiBackend> wiki;
    std::shared_ptr<WebBackend> search;
    if (web) {
      search = std::make_shared<LiveWebBackend>(config_.search_url);
    } else {
      wiki = std::make_shared<LiveWikiBackend>(config_.wiki_url);
    }
    if (!config_.tape.empty()) {
      tape_ = fs::exists(config_.tape) ? ToolTape::load(config_.tape) : std::make_shared<ToolTape>();
      record_tape_ = true;
      if (wiki) wiki = std::make_shared<TapeWikiBackend>(tape_, wiki);
      if (search) search = std::make_shared<TapeWebBackend>(tape_, search);
    }
    tools_.wiki = wiki;
    tools_.web = search;
  }
}

void Environment::save_recordings() const {
  if (recorder_) {
    recorder_->fixture().save(config_.record);
    spdlog::info("recorded {} completions to {}", recorder_->fixture().size(), config_.record);
  }
  if (record_tape_ && tape_) {
    tape_->save(config_.tape);
    spdlog::info("recorded {} tool responses to {}", tape_->size(), config_.tape);
  }
}

AgentConfig agent_config(const RunConfig& c, std::optional<CalibrationProfile> profile) {
  AgentConfig a;
  a.dataset = dataset_from_string(c.dataset);
  a.mode = agent_mode_from_string(c.mode);
  a.base_mode = base_kind(c);
  a.grammar = default_grammar(a.dataset);
  a.max_steps = c.max_steps;
  a.max_tokens = c.max_tokens;
  a.k = c.k;
  a.temperature = c.temperature;
  a.backoff = c.backoff;
  a.oracle = oracle_mode_from_string(c.oracle);
  a.oracle_timeout = std::chrono::milliseconds(static_cast<std::int64_t>(c.oracle_timeout_s * 1000.0));
  a.profile = std::move(profile);
  a.verbal_threshold = c.verbal_threshold;
  return a;
}

std::vector<QAItem> load_items(const RunConfig& c, bool train) {
  const bool use_train = train && !c.train_data.empty();
  const std::string& path = use_train ? c.train_data : c.data;
  if (path.empty()) throw Error(ErrorCode::ConfigError, "no dataset path configured ('data')");
  SamplingSpec sampling;
  sampling.seed = c.seed;
  sampling.count = train ? c.train_count : c.count;
  sampling.per_task = c.per_task;
  return load_dataset(path, dataset_from_string(c.dataset),
                      source_format_from_string(use_train ? c.train_format : c.data_format), sampling);
}

RunResult execute_run(const RunConfig& c, std::optional<CalibrationProfile> profile, OracleQueue* queue,
                      RunProgress* progress) {
  const AgentMode mode = agent_mode_from_string(c.mode);
  if (is_routed(mode) && !profile) {
    if (c.profile.empty()) throw Error(ErrorCode::ConfigError, fmt::format("mode {} needs 'profile'", c.mode));
    profile = load_profile(c.profile);
  }
  Environment env(c);
  Agent agent(env.llm(), env.tools(), env.prompts(), agent_config(c, std::move(profile)), queue);
  const std::vector<QAItem> items = load_items(c, false);
  spdlog::info("running {} episodes ({}, {} workers)", items.size(), c.mode, c.workers);

  RunResult r;
  r.episodes = run_episodes(agent, items, c.workers, progress);
  r.report = aggregate(r.episodes);
  r.usage = env.llm().usage_report();
  r.tool_usage = env.tools().usage.total();
  env.save_recordings();
  if (r.usage.total_output_tokens != r.report.output_tokens || r.tool_usage != r.report.tool_calls) {
    spdlog::warn("episode totals ({} tokens, {} tool calls) differ from the counters ({} tokens, {} tool calls)",
                 r.report.output_tokens, r.report.tool_calls, r.usage.total_output_tokens, r.tool_usage);
  }
  return r;
}

void write_run_outputs(const RunConfig& c, const RunResult& r) {
  const fs::path dir(c.out_dir);
  fs::create_directories(dir);
  write_trajectory_log(dir / "trajectory.jsonl", to_json(c), r.episodes);
  write_text(dir / "report.json", canonical_dump(report_to_json(r.report)) + "\n");
  write_text(dir / "report.txt", report_to_text(r.report));
  const json usage = {{"llm", usage_to_json(r.usage)},
                      {"tool_calls", r.tool_usage},
                      {"consistent", r.usage.total_output_tokens == r.report.output_tokens &&
                                         r.tool_usage == r.report.tool_calls}};
  write_text(dir / "usage.json", canonical_dump(usage) + "\n");
}

int cmd_calibrate(const RunConfig& c, std::ostream& out) {
  Environment env(c);
  const std::vector<QAItem> items = load_items(c, true);
  const EstimatorSpec estimator{method_from_string(c.estimator), softmax_scope_from_string(c.softmax_scope)};
  const PromptKind kind = base_kind(c);
  const bool multi = estimator.method == Method::MultiInference;

  AgentConfig ac = agent_config(c, std::nullopt);
  ac.mode = AgentMode::Standard;
  ac.oracle = OracleMode::Off;
  Agent agent(env.llm(), env.tools(), env.prompts(), ac);
  spdlog::info("calibrating on {} items ({} prompt, {})", items.size(), to_string(kind), c.estimator);

  const CalibrationSet cal = build_calibration_set(
      items, [&](const QAItem& item) { return agent.calibration_attempt(item, kind, multi); }, estimator,
      kind == PromptKind::CoT ? PromptMode::CoT : PromptMode::Standard, c.workers);
  CalibrationProfile profile = multi ? multi_inference_threshold(cal)
                                     : estimate_threshold(cal, {threshold_method_from_string(c.threshold), c.q});
  profile.created_at = c.created_at.empty() ? utc_now() : c.created_at;
  const std::string source = c.train_data.empty() ? c.data : c.train_data;
  profile.dataset_id = fmt::format("{}:{}", c.dataset, fs::path(source).filename().string());

  const fs::path profile_path = out_path(c, c.profile, "profile.json");
  const fs::path set_path = out_path(c, c.calibration_set, "calibration-set.json");
  if (profile_path.has_parent_path()) fs::create_directories(profile_path.parent_path());
  save_profile(profile, profile_path);
  write_text(set_path, canonical_dump(calibration_set_to_json(cal)) + "\n");
  env.save_recordings();

  out << fmt::format("calibration set: {} of {} items ({} correct but unscored)\n", cal.entries.size(), cal.attempted,
                     cal.unscored);
  out << fmt::format("tau = {} ({}, {})\n", profile.tau, to_string(profile.estimator.method),
                     multi ? "mean" : std::string(to_string(profile.threshold_method)));
  out << fmt::format("profile: {}\ncalibration set: {}\n", profile_path.string(), set_path.string());
  return kExitOk;
}

int cmd_run(const RunConfig& c, std::ostream& out) {
  const RunResult r = execute_run(c);
  write_run_outputs(c, r);
  out << report_to_text(r.report);
  out << fmt::format("outputs: {}\n", c.out_dir);
  return kExitOk;
}

int cmd_sweep(const RunConfig& c, const std::vector<double>& qs, const std::vector<std::size_t>& sizes,
              std::ostream& out) {
  if (qs.empty() && sizes.empty()) throw Error(ErrorCode::ConfigError, "sweep needs quantiles or set sizes");
  if (!is_routed(agent_mode_from_string(c.mode))) {
    throw Error(ErrorCode::ConfigError, "sweep needs mode uala-s or uala-m");
  }
  const CalibrationSet cal =
      calibration_set_from_json(read_json_file(out_path(c, c.calibration_set, "calibration-set.json")));
  const ProfileEvaluator eval = [&](const CalibrationProfile& p) {
    const RunResult r = execute_run(c, p);
    return SweepOutcome{r.report.base_escalations, r.report.em, r.report.tool_calls};
  };
  json doc = {{"format", "uala.sweep/1"}, {"mode", c.mode}, {"estimator", c.estimator}};

  if (!qs.empty()) {
    const SweepTable t = sweep_quantiles(cal, qs, eval);
    json rows = json::array();
    out << fmt::format("{:>6} {:>12} {:>12} {:>6} {:>11}\n", "q", "tau", "escalations", "EM", "tool calls");
    for (const auto& row : t.rows) {
      rows.push_back({{"q", row.q},
                      {"tau", row.tau},
                      {"escalations", row.outcome.escalations},
                      {"em", row.outcome.metric},
                      {"tool_calls", row.outcome.tool_calls}});
      out << fmt::format("{:>6} {:>12.6f} {:>12} {:>6.1f} {:>11}\n", row.q, row.tau, row.outcome.escalations,
                         row.outcome.metric, row.outcome.tool_calls);
    }
    doc["quantiles"] = {{"rows", std::move(rows)}, {"escalations_non_increasing", t.escalations_non_increasing}};
    out << fmt::format("escalations non-increasing in q: {}\n", t.escalations_non_increasing ? "yes" : "no");
  }
  if (!sizes.empty()) {
    const ThresholdSpec spec{threshold_method_from_string(c.threshold), c.q};
    const auto rows = sweep_calibration_sizes(cal, sizes, c.seed, spec, eval);
    json jrows = json::array();
    out << fmt::format("{:>6} {:>12} {:>12} {:>6} {:>11}\n", "size", "tau", "escalations", "EM", "tool calls");
    for (const auto& row : rows) {
      jrows.push_back({{"size", row.size},
                       {"tau", row.tau},
                       {"escalations", row.outcome.escalations},
                       {"em", row.outcome.metric},
                       {"tool_calls", row.outcome.tool_calls}});
      out << fmt::format("{:>6} {:>12.6f} {:>12} {:>6.1f} {:>11}\n", row.size, row.tau, row.outcome.escalations,
                         row.outcome.metric, row.outcome.tool_calls);
    }
    doc["sizes"] = std::move(jrows);
  }
  write_text(fs::path(c.out_dir) / "sweep.json", canonical_dump(doc) + "\n");
  return kExitOk;
}

int cmd_analyze(const std::vector<fs::path>& logs, const fs::path& json_out, std::ostream& out) {
  struct Group {
    std::vector<double> correct;
    std::vector<double> incorrect;
  };
  std::map<std::pair<std::string, std::string>, Group> groups;  // (dataset, estimator)
  for (const auto& path : logs) {
    const auto records = read_jsonl(path);
    std::string estimator = "unknown";
    if (!records.empty() && records.front().value("type", "") == "run") {
      estimator = records.front().at("config").value("estimator", estimator);
    }
    for (const auto& e : read_trajectory_log(path)) {
      if (!e.base_uncertainty) continue;
      Group& g = groups[{std::string(to_string(e.dataset)), estimator}];
      (answers_match(e.dataset, e.base_answer, e.gold) ? g.correct : g.incorrect).push_back(e.base_uncertainty->value);
    }
  }

  json doc = {{"format", "uala.analysis/1"}, {"groups", json::array()}};
  std::size_t analysed = 0;
  out << fmt::format("{:<11} {:<18} {:>5} {:>5} {:>10} {:>10} {:>10} {:>12} {:>8}\n", "dataset", "estimator", "n+",
                     "n-", "mean+", "mean-", "diff", "p", "d");
  for (const auto& [key, g] : groups) {
    json entry = {{"dataset", key.first}, {"estimator", key.second}};
    if (!g.correct.empty()) entry["correct"] = summary_to_json(summarize(g.correct));
    if (!g.incorrect.empty()) entry["incorrect"] = summary_to_json(summarize(g.incorrect));
    try {
      const GroupStats s = compare_groups(g.correct, g.incorrect);
      entry["stats"] = group_stats_to_json(s);
      ++analysed;
      out << fmt::format("{:<11} {:<18} {:>5} {:>5} {:>10.4f} {:>10.4f} {:>10.4f} {:>12} {:>8}\n", key.first,
                         key.second, s.n_correct, s.n_incorrect, s.mean_correct, s.mean_incorrect, s.mean_diff,
                         s.p_value ? fmt::format("{:.3g}", *s.p_value) : "n/a",
                         s.cohens_d ? fmt::format("{:.3f}", *s.cohens_d) : "n/a");
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientData) throw;
      entry["stats"] = nullptr;
      entry["error"] = e.what();
      out << fmt::format("{:<11} {:<18} {:>5} {:>5}  insufficient data\n", key.first, key.second, g.correct.size(),
                         g.incorrect.size());
    }
    doc["groups"].push_back(std::move(entry));
  }
  if (!json_out.empty()) write_text(json_out, canonical_dump(doc) + "\n");
  if (analysed == 0) throw Error(ErrorCode::InsufficientData, "no group has two or more answers on each side");
  return kExitOk;
}

int cmd_report(const std::vector<fs::path>& logs, const fs::path& json_out, std::ostream& out) {
  json reports = json::array();
  for (const auto& path : logs) {
    const auto episodes = read_trajectory_log(path);
    const RunReport r = aggregate(episodes);
    if (logs.size() > 1) out << path.string() << "\n";
    out << report_to_text(r);
    reports.push_back(report_to_json(r));
  }
  if (!json_out.empty()) write_text(json_out, canonical_dump(reports.size() == 1 ? reports[0] : reports) + "\n");
  return kExitOk;
}

int cmd_serve(const RunConfig& c, const ServeOptions& opts, std::ostream& out) {
  RunConfig rc = c;
  rc.oracle = "interactive";
  const std::size_t total = load_items(rc, false).size();
  OracleQueue queue;
  RunProgress progress;
  EscalationServer server(queue, progress, total, opts.console_dir);
  int port = 0;
  try {
    port = server.start(opts.host, opts.port);
  } catch (const StartupError& e) {
    spdlog::error("{}", e.what());
    return kExitStartup;
  }
  out << fmt::format("escalation API on http://{}:{}/api/escalations\n", opts.host, port) << std::flush;

  g_stop = 0;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const RunResult r = execute_run(rc, std::nullopt, &queue, &progress);
  write_run_outputs(rc, r);
  out << report_to_text(r.report) << std::flush;
  while (!opts.exit_when_done && !g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
  server.stop();
  return kExitOk;
}

}  // namespace uala::app
