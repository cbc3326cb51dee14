// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#include "cwalk/runner.hpp"

#include <algorithm>
#include <system_error>

#include "cwalk/app_graph.hpp"
#include "cwalk/error.hpp"
#include "cwalk/io.hpp"
#include "cwalk/text.hpp"

namespace cwalk {

using nlohmann::json;

namespace {

std::vector<const Task*> select_tasks(const AppGraph& graph, const std::vector<std::string>& ids) {
  std::vector<const Task*> out;
  if (ids.empty()) {
    for (const auto& t : graph.tasks) out.push_back(&t);
    return out;
  }
  for (const auto& id : ids) {
    const Task* t = graph.find_task(id);
    if (!t) throw Error(Errc::UnknownTask, "app '" + graph.name + "' has no task '" + id + "'");
    out.push_back(t);
  }
  return out;
}

BackendConfig labelled(BackendConfig config, const std::optional<std::string>& label) {
  if (label) config.model_label = *label;
  return config;
}

AgentKind agent_kind_for(const BackendConfig& config, Backend& backend) {
  switch (config.kind) {
    case BackendKind::scripted: return AgentKind::scripted;
    case BackendKind::remote_chat: return AgentKind::llm;
    case BackendKind::replay: break;
  }
  if (auto* replay = dynamic_cast<ReplayBackend*>(&backend); replay && replay->header().is_object()) {
    const auto walk = replay->header().value("walk", json::object());
    if (auto k = parse_agent_kind(walk.value("agent_kind", std::string()))) return *k;
  }
  return AgentKind::llm;
}

/// Files a backend reads, referenced by hash in run manifests.
std::vector<store::SourceRef> backend_inputs(const BackendConfig& config) {
  std::vector<store::SourceRef> refs;
  if (config.script_path) refs.push_back(store::source_ref(*config.script_path));
  if (config.recording_path) refs.push_back(store::source_ref(*config.recording_path));
  return refs;
}

fs::path manifest_dir_of(const fs::path& file) {
  auto dir = file.parent_path();
  return dir.empty() ? fs::path(".") : dir;
}

void ensure_fresh_run(const fs::path& dir, const std::string& run_id, bool force) {
  const auto path = dir / (run_id + store::kRunSuffix);
  std::error_code ec;
  if (fs::exists(path, ec)) {
    if (!force) throw Error(Errc::IoFailure, "run id '" + run_id + "' already exists in " + dir.string());
    fs::remove(path, ec);
  }
}

}  // namespace

WalkResult run_walk(const WalkOptions& o) {
  if (o.runs < 1) throw Error(Errc::InvalidConfig, "runs must be >= 1");
  if (o.run_id.empty()) throw Error(Errc::InvalidConfig, "run id is empty");
  o.session.validate();
  const auto graph = load_app_graph(o.manifest);
  const auto tasks = select_tasks(graph, o.task_ids);
  const auto prompts = PromptLibrary::load(o.prompts_dir);
  const auto config = labelled(o.backend, o.label);
  ensure_fresh_run(o.out_dir, o.run_id, o.force);

  std::shared_ptr<Backend> backend = make_backend(config);
  const auto kind = agent_kind_for(config, *backend);
  const auto backend_label = backend->label();

  if (o.record) {
    std::vector<std::string> ids;
    for (const auto* t : tasks) ids.push_back(t->id);
    std::error_code ec;
    auto rel = fs::relative(fs::absolute(o.manifest), fs::absolute(manifest_dir_of(*o.record)), ec);
    json walk{{"manifest", (ec || rel.empty() ? fs::absolute(o.manifest) : rel).generic_string()},
              {"task_ids", ids},
              {"runs", o.runs},
              {"run_id", o.run_id},
              {"agent_kind", to_string(kind)},
              {"session_config", o.session.to_json()},
              {"timestamp", o.timestamp ? json(*o.timestamp) : json(nullptr)}};
    backend = record_session(backend, *o.record, o.force, json{{"walk", walk}});
  }

  const Clock clock = o.timestamp ? fixed_clock(*o.timestamp) : Clock(utc_now);
  WalkResult result;
  for (int k = 1; k <= o.runs; ++k) {
    const auto run_label = backend_label + "-run" + std::to_string(k);
    for (const auto* task : tasks) {
      SessionIdentity id{text::slug(o.run_id + "-" + run_label + "-" + task->id), kind, backend_label, o.run_id,
                         run_label};
      auto trace = run_session(graph, *task, *backend, o.session, prompts, std::move(id), clock);
      result.trace_files.push_back(store::persist_trace(trace, o.out_dir));
      result.traces.push_back(std::move(trace));
    }
  }

  store::RunManifest m;
  m.run_id = o.run_id;
  m.command = "walk";
  m.app_manifest = store::source_ref(o.manifest);
  for (const auto* t : tasks) m.task_ids.push_back(t->id);
  m.backend = config.to_json();
  m.backend_files = backend_inputs(config);
  if (o.record) {
    backend.reset();  // flush and close the recording before hashing it
    m.backend_files.push_back(store::source_ref(*o.record));
  }
  m.with_confusion = o.session.with_confusion;
  m.repetitions = o.runs;
  m.output_dir = o.out_dir;
  m.created_at = clock();
  for (const auto& f : result.trace_files) m.outputs.push_back(f.filename().string());
  result.run_manifest = store::write_run_manifest(m, o.out_dir);
  return result;
}

WalkOptions walk_options_from_recording(const fs::path& recording, const fs::path& out_dir,
                                        const std::optional<fs::path>& manifest) {
  ReplayBackend probe(recording);
  const auto& header = probe.header();
  if (!header.is_object() || !header.contains("walk")) {
    throw Error(Errc::SchemaViolation, recording.string() + ": recording has no walk header");
  }
  WalkOptions o;
  try {
    const auto& w = header.at("walk");
    if (manifest) {
      o.manifest = *manifest;
    } else {
      fs::path m = w.at("manifest").get<std::string>();
      o.manifest = (m.is_absolute() ? m : manifest_dir_of(recording) / m).lexically_normal();
    }
    o.task_ids = w.at("task_ids").get<std::vector<std::string>>();
    o.runs = w.at("runs").get<int>();
    o.run_id = w.at("run_id").get<std::string>();
    o.session = SessionConfig::from_json(w.at("session_config"));
    if (w.contains("timestamp") && w["timestamp"].is_string()) o.timestamp = w["timestamp"].get<std::string>();
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaViolation, recording.string() + ": bad walk header: " + e.what());
  }
  o.backend.kind = BackendKind::replay;
  o.backend.recording_path = recording;
  o.backend.model_label = "replay";
  o.out_dir = out_dir;
  o.prompts_dir = PromptLibrary::default_dir();
  return o;
}

std::vector<RatingRequest> load_screen_requests(const fs::path& path) {
  const auto text = io::read_file(path);
  std::vector<RatingRequest> out;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const auto line = text::trim(std::string_view(text).substr(pos, end - pos));
    pos = end + 1;
    ++lineno;
    if (line.empty()) continue;
    const auto where = path.filename().string() + ":" + std::to_string(lineno);
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("task") || !j.contains("screen") ||
        !j["task"].is_string() || !j["screen"].is_string()) {
      throw Error(Errc::SchemaViolation, where + ": expected {\"task\": ..., \"screen\": ...}");
    }
    out.push_back({j["task"].get<std::string>(), j["screen"].get<std::string>()});
  }
  return out;
}

RateResult run_rate_screens(const RateOptions& o) {
  if (o.run_id.empty()) throw Error(Errc::InvalidConfig, "run id is empty");
  const auto graph = load_app_graph(o.manifest);
  const auto requests = load_screen_requests(o.screens_file);
  const auto prompts = PromptLibrary::load(o.prompts_dir);
  const auto config = labelled(o.backend, o.label);
  const auto out_dir = manifest_dir_of(o.out_file);
  ensure_fresh_run(out_dir, o.run_id, o.force);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + out_dir.string() + ": " + ec.message());

  std::shared_ptr<Backend> backend = make_backend(config);
  const auto label = backend->label();
  if (o.record) backend = record_session(backend, *o.record, o.force, json{{"rate", {{"run_id", o.run_id}}}});

  RateResult result;
  result.ratings = rate_screens(graph, requests, *backend, prompts, label, o.concurrency);
  io::write_file_atomic(o.out_file, to_jsonl(result.ratings));

  const Clock clock = o.timestamp ? fixed_clock(*o.timestamp) : Clock(utc_now);
  store::RunManifest m;
  m.run_id = o.run_id;
  m.command = "rate-screens";
  m.app_manifest = store::source_ref(o.manifest);
  for (const auto& r : requests) {
    if (std::find(m.task_ids.begin(), m.task_ids.end(), r.task_id) == m.task_ids.end()) m.task_ids.push_back(r.task_id);
  }
  m.backend = config.to_json();
  m.backend_files = backend_inputs(config);
  m.backend_files.push_back(store::source_ref(o.screens_file));
  if (o.record) {
    backend.reset();
    m.backend_files.push_back(store::source_ref(*o.record));
  }
  m.without_context = true;
  m.output_dir = out_dir;
  m.created_at = clock();
  m.outputs.push_back(o.out_file.filename().string());
  result.run_manifest = store::write_run_manifest(m, out_dir);
  return result;
}

namespace {

ScreenCatalog catalog_from(const std::vector<SessionTrace>& traces, const std::vector<ScreenRating>& ratings) {
  ScreenCatalog c;
  for (const auto& t : traces) {
    c.tasks.insert(t.task_id());
    c.screens.insert(t.task.start_screen);
    c.screens.insert(t.task.goal_screens.begin(), t.task.goal_screens.end());
    for (const auto& p : t.task.correct_paths) c.screens.insert(p.begin(), p.end());
    for (const auto& s : t.steps) {
      c.screens.insert(s.screen);
      if (s.resolved) c.screens.insert(s.resolved->to);
    }
  }
  for (const auto& r : ratings) {
    c.tasks.insert(r.task_id);
    c.screens.insert(r.screen);
  }
  return c;
}

}  // namespace

MetricsResult run_metrics(const MetricsOptions& o) {
  MetricsResult result;
  ReportInputs in;
  std::vector<fs::path> files;

  auto traces = store::load_traces(o.traces_dir);
  in.traces = std::move(traces.items);
  files = traces.files;
  result.issues = std::move(traces.issues);

  if (o.ratings) {
    auto ratings = store::load_ratings(*o.ratings);
    in.ratings = std::move(ratings.items);
    files.insert(files.end(), ratings.files.begin(), ratings.files.end());
    result.issues.insert(result.issues.end(), ratings.issues.begin(), ratings.issues.end());
  }
  if (o.human_labels) {
    in.human_labels = load_human_labels(*o.human_labels);
    files.push_back(*o.human_labels);
  }
  in.catalog = o.manifest ? ScreenCatalog::from_graph(load_app_graph(*o.manifest)) : catalog_from(in.traces, in.ratings);
  if (in.traces.empty()) throw Error(Errc::EmptyInput, "no readable traces in " + o.traces_dir.string());
  in.provenance = store::provenance_of(files);

  result.report = build_report(in, o.group_by, o.alpha);
  std::error_code ec;
  fs::create_directories(o.out_dir, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + o.out_dir.string() + ": " + ec.message());
  result.csv = o.out_dir / "metrics.csv";
  result.summary = o.out_dir / "summary.md";
  io::write_file_atomic(result.csv, render_csv(result.report));
  io::write_file_atomic(result.summary, render_summary(result.report));
  return result;
}

}  // namespace cwalk
