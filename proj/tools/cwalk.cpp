// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

// Command-line front end: validate, walk, rate-screens, metrics, serve,
// replay. Exit status 0 on success, 1 on validation findings, 2 on runtime
// errors, 64 on usage errors.

#include <csignal>
#include <ctime>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cwalk/app_graph.hpp"
#include "cwalk/error.hpp"
#include "cwalk/io.hpp"
#include "cwalk/runner.hpp"
#include "cwalk/service.hpp"

namespace {

using namespace cwalk;

constexpr int kExitFindings = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitUsage = 64;

std::string default_run_id() {
  const auto t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "run-%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

int cmd_validate(const fs::path& manifest) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(io::read_file(manifest));
  } catch (const nlohmann::json::parse_error& e) {
    std::cout << "ManifestSyntax " << manifest.string() << ": " << e.what() << "\n";
    return kExitFindings;
  }
  AppGraph graph;
  try {
    graph = parse_app_graph(doc, manifest.parent_path());
  } catch (const Error& e) {
    if (e.code() != Errc::ManifestSyntax) throw;
    std::cout << e.what() << "\n";
    return kExitFindings;
  }
  const auto findings = validate_graph(graph);
  for (const auto& f : findings) std::cout << to_string(f.rule) << " " << f.entity << ": " << f.message << "\n";
  return findings.empty() ? 0 : kExitFindings;
}

struct SessionFlags {
  int max_steps = SessionConfig{}.max_steps;
  int stuck_limit = SessionConfig{}.stuck_limit;
  double threshold = SessionConfig{}.match_threshold;
  std::size_t history_limit = 0;
  bool no_probe = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--max-steps", max_steps, "Abort after this many turns")->capture_default_str();
    cmd->add_option("--stuck-limit", stuck_limit, "Abort after this many fail-safes")->capture_default_str();
    cmd->add_option("--match-threshold", threshold, "Minimum token overlap for a free-text match")
        ->capture_default_str();
    cmd->add_option("--history-limit", history_limit, "Forward only the last N turns (0 = all)");
    cmd->add_flag("--no-probe", no_probe, "Do not probe short rationales");
  }

  SessionConfig config(bool with_confusion) const {
    SessionConfig c;
    c.max_steps = max_steps;
    c.stuck_limit = stuck_limit;
    c.match_threshold = threshold;
    c.history_limit = history_limit;
    c.probe = !no_probe;
    c.with_confusion = with_confusion;
    return c;
  }
};

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Automated cognitive walkthroughs over screen-graph app models", "cwalk"};
  app.require_subcommand(1);
  std::string prompts_dir = PromptLibrary::default_dir().string();
  app.add_option("--prompts", prompts_dir, "Prompt template directory")->capture_default_str();

  // validate
  auto* validate = app.add_subcommand("validate", "Check an app manifest; prints one line per finding");
  std::string v_manifest;
  validate->add_option("manifest", v_manifest, "App manifest (JSON)")->required();

  // walk
  auto* walk = app.add_subcommand("walk", "Run evaluator sessions and write traces");
  WalkOptions w;
  std::string w_manifest, w_backend, w_out = "traces", w_record, w_timestamp, w_label;
  bool w_confusion = false;
  SessionFlags w_flags;
  walk->add_option("--manifest", w_manifest, "App manifest")->required();
  walk->add_option("--task", w.task_ids, "Task id (repeatable; default all)");
  walk->add_option("--backend", w_backend, "scripted:<file>, replay:<file> or a backend config JSON")->required();
  walk->add_option("--runs", w.runs, "Repetitions per task")->check(CLI::PositiveNumber)->capture_default_str();
  walk->add_flag("--with-confusion", w_confusion, "Ask for a confusion rating every turn");
  walk->add_option("--out", w_out, "Trace directory")->capture_default_str();
  walk->add_option("--run-id", w.run_id, "Run id (default derived from the clock)");
  walk->add_option("--label", w_label, "Backend label recorded in traces");
  walk->add_option("--record", w_record, "Record backend exchanges to this JSONL file");
  walk->add_flag("--force", w.force, "Overwrite an existing recording or run manifest");
  walk->add_option("--timestamp", w_timestamp, "Use this fixed ISO-8601 time for every timestamp");
  w_flags.add(walk);

  // rate-screens
  auto* rate = app.add_subcommand("rate-screens", "Rate isolated screens with the without-context prompt");
  RateOptions r;
  std::string r_manifest, r_screens, r_backend, r_out = "ratings.ratings.jsonl", r_record, r_timestamp, r_label;
  rate->add_option("--manifest", r_manifest, "App manifest")->required();
  rate->add_option("--screens-file", r_screens, "JSONL of {\"task\", \"screen\"} items")->required();
  rate->add_option("--backend", r_backend, "Backend spec")->required();
  rate->add_option("--out", r_out, "Ratings file to write")->capture_default_str();
  rate->add_option("--run-id", r.run_id, "Run id (default derived from the clock)");
  rate->add_option("--label", r_label, "Rater label (default: backend label)");
  rate->add_option("--record", r_record, "Record backend exchanges to this JSONL file");
  rate->add_flag("--force", r.force, "Overwrite an existing recording or run manifest");
  rate->add_option("--timestamp", r_timestamp, "Fixed ISO-8601 time for the run manifest");
  rate->add_option("--jobs", r.concurrency, "Concurrent backend calls")->check(CLI::PositiveNumber);

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Build the metrics report from traces and ratings");
  MetricsOptions m;
  std::string m_traces, m_ratings, m_labels, m_manifest, m_out = "report", m_group = "agent_kind";
  metrics->add_option("--traces", m_traces, "Trace directory")->required();
  metrics->add_option("--ratings", m_ratings, "Ratings file or directory of *.ratings.jsonl");
  metrics->add_option("--human-labels", m_labels, "Coded human failure points (JSONL)");
  metrics->add_option("--manifest", m_manifest, "App manifest used to check label references");
  metrics->add_option("--out", m_out, "Output directory")->capture_default_str();
  metrics->add_option("--group-by", m_group, "agent_kind | backend_label | run")
      ->check(CLI::IsMember({"agent_kind", "backend_label", "run"}))
      ->capture_default_str();
  metrics->add_option("--alpha", m.alpha, "Additive smoothing for path distributions")->check(CLI::NonNegativeNumber);

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the human session API");
  std::string s_manifest, s_host = "127.0.0.1", s_traces = "traces", s_static;
  int s_port = kDefaultPort;
  ServiceOptions s;
  bool s_hide_chips = false;
  serve->add_option("--manifest", s_manifest, "App manifest")->required();
  serve->add_option("--port", s_port, "TCP port")->capture_default_str();
  serve->add_option("--host", s_host, "Bind address")->capture_default_str();
  serve->add_option("--traces", s_traces, "Directory for closed session traces")->capture_default_str();
  serve->add_option("--static", s_static, "Directory of UI assets served at /");
  serve->add_option("--run-id", s.run_id, "Run id recorded in human traces")->capture_default_str();
  serve->add_flag("--probe", s.probe, "Probe short think-aloud notes");
  serve->add_flag("--hide-chips", s_hide_chips, "Do not offer transition chips");
  serve->add_flag("--show-step-count", s.show_step_count, "Show participants their step count");

  // replay
  auto* replay = app.add_subcommand("replay", "Re-run a recorded walk against its recording");
  std::string p_recording, p_out = "replay", p_manifest;
  bool p_force = false;
  replay->add_option("--recording", p_recording, "Recording written by walk --record")->required();
  replay->add_option("--out", p_out, "Trace directory")->capture_default_str();
  replay->add_option("--manifest", p_manifest, "Override the recorded manifest path");
  replay->add_flag("--force", p_force, "Overwrite an existing run manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (validate->parsed()) return cmd_validate(v_manifest);

    if (walk->parsed()) {
      w.manifest = w_manifest;
      w.backend = parse_backend_spec(w_backend);
      if (!w_label.empty()) w.label = w_label;
      w.session = w_flags.config(w_confusion);
      w.out_dir = w_out;
      if (w.run_id.empty()) w.run_id = default_run_id();
      if (!w_record.empty()) w.record = w_record;
      if (!w_timestamp.empty()) w.timestamp = w_timestamp;
      w.prompts_dir = prompts_dir;
      const auto result = run_walk(w);
      for (const auto& t : result.traces) {
        std::cerr << t.session_id << ": " << to_string(*t.outcome) << "\n";
      }
      std::cerr << "wrote " << result.trace_files.size() << " traces and " << result.run_manifest.string() << "\n";
      return 0;
    }

    if (rate->parsed()) {
      r.manifest = r_manifest;
      r.screens_file = r_screens;
      r.backend = parse_backend_spec(r_backend);
      if (!r_label.empty()) r.label = r_label;
      r.out_file = r_out;
      if (r.run_id.empty()) r.run_id = default_run_id();
      if (!r_record.empty()) r.record = r_record;
      if (!r_timestamp.empty()) r.timestamp = r_timestamp;
      r.prompts_dir = prompts_dir;
      const auto result = run_rate_screens(r);
      std::cerr << "wrote " << result.ratings.size() << " ratings to " << r_out << "\n";
      return 0;
    }

    if (metrics->parsed()) {
      m.traces_dir = m_traces;
      if (!m_ratings.empty()) m.ratings = m_ratings;
      if (!m_labels.empty()) m.human_labels = m_labels;
      if (!m_manifest.empty()) m.manifest = m_manifest;
      m.out_dir = m_out;
      m.group_by = *parse_group_by(m_group);
      const auto result = run_metrics(m);
      for (const auto& issue : result.issues) std::cerr << "skipped " << issue.message << "\n";
      std::cerr << "wrote " << result.csv.string() << " and " << result.summary.string() << "\n";
      return 0;
    }

    if (serve->parsed()) {
      s.show_chips = !s_hide_chips;
      s.trace_dir = s_traces;
      if (!s_static.empty()) s.static_dir = s_static;
      SessionService service(load_app_graph(s_manifest), s);
      HttpServer server(service);
      const int port = server.bind(s_host, s_port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "serving " << service.graph().name << " on http://" << s_host << ":" << port << "\n";
      server.listen();
      g_server = nullptr;
      return 0;
    }

    if (replay->parsed()) {
      auto o = walk_options_from_recording(
          p_recording, p_out, p_manifest.empty() ? std::nullopt : std::optional<fs::path>(p_manifest));
      o.force = p_force;
      o.prompts_dir = prompts_dir;
      const auto result = run_walk(o);
      std::cerr << "replayed " << result.traces.size() << " sessions into " << p_out << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "cwalk: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "cwalk: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
