// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#include "cwalk/store.hpp"

#include <algorithm>
#include <system_error>

#include "cwalk/error.hpp"
#include "cwalk/io.hpp"

namespace cwalk::store {

using nlohmann::json;

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<fs::path> list_files(const fs::path& dir, std::string_view suffix) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(Errc::IoFailure, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
    if (it->is_regular_file() && ends_with(it->path().filename().string(), suffix)) files.push_back(it->path());
  }
  if (ec) throw Error(Errc::IoFailure, "cannot list " + dir.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());
  return files;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

fs::path trace_path(const fs::path& dir, const std::string& session_id) { return dir / (session_id + kTraceSuffix); }

fs::path persist_trace(const SessionTrace& trace, const fs::path& dir) {
  if (trace.session_id.empty() || trace.session_id.find_first_of("/\\") != std::string::npos) {
    throw Error(Errc::IoFailure, "session id '" + trace.session_id + "' is not usable as a file name");
  }
  ensure_dir(dir);
  auto path = trace_path(dir, trace.session_id);
  io::write_file_atomic(path, to_jsonl(trace));
  return path;
}

Loaded<SessionTrace> load_traces(const fs::path& dir) {
  Loaded<SessionTrace> out;
  for (const auto& file : list_files(dir, kTraceSuffix)) {
    try {
      out.items.push_back(trace_from_jsonl(io::read_file(file), file.filename().string()));
      out.files.push_back(file);
    } catch (const Error& e) {
      if (e.code() != Errc::SchemaViolation) throw;
      out.issues.push_back({file, e.what()});
    }
  }
  return out;
}

Loaded<ScreenRating> load_ratings(const fs::path& file_or_dir) {
  Loaded<ScreenRating> out;
  std::error_code ec;
  const bool is_dir = fs::is_directory(file_or_dir, ec);
  const auto files = is_dir ? list_files(file_or_dir, kRatingsSuffix) : std::vector<fs::path>{file_or_dir};
  for (const auto& file : files) {
    try {
      auto ratings = ratings_from_jsonl(io::read_file(file), file.filename().string());
      out.items.insert(out.items.end(), std::make_move_iterator(ratings.begin()),
                       std::make_move_iterator(ratings.end()));
      out.files.push_back(file);
    } catch (const Error& e) {
      if (e.code() != Errc::SchemaViolation || !is_dir) throw;
      out.issues.push_back({file, e.what()});
    }
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> provenance_of(const std::vector<fs::path>& files) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : files) out.emplace_back(f.filename().string(), io::sha256_hex(io::read_file(f)));
  std::sort(out.begin(), out.end());
  return out;
}

SourceRef source_ref(const fs::path& file) { return {file, io::sha256_hex(io::read_file(file))}; }

void RunManifest::validate() const {
  if (run_id.empty()) throw Error(Errc::InvalidConfig, "run_id is empty");
  if (run_id.find_first_of("/\\") != std::string::npos) throw Error(Errc::InvalidConfig, "run_id contains a slash");
  if (repetitions < 1) throw Error(Errc::InvalidConfig, "repetitions must be >= 1");
}

namespace {

json ref_json(const SourceRef& r) { return {{"path", r.path.generic_string()}, {"sha256", r.sha256}}; }
SourceRef ref_from(const json& j) { return {j.at("path").get<std::string>(), j.at("sha256").get<std::string>()}; }

}  // namespace

json RunManifest::to_json() const {
  json files = json::array();
  for (const auto& f : backend_files) files.push_back(ref_json(f));
  return {{"schema", "cwalk-run/1"},
          {"run_id", run_id},
          {"command", command},
          {"app_manifest", ref_json(app_manifest)},
          {"task_ids", task_ids},
          {"backend", backend},
          {"backend_files", files},
          {"with_confusion", with_confusion},
          {"without_context", without_context},
          {"repetitions", repetitions},
          {"output_dir", output_dir.generic_string()},
          {"created_at", created_at},
          {"outputs", outputs}};
}

RunManifest RunManifest::from_json(const json& j) {
  try {
    RunManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.command = j.value("command", std::string());
    m.app_manifest = ref_from(j.at("app_manifest"));
    m.task_ids = j.at("task_ids").get<std::vector<std::string>>();
    m.backend = j.value("backend", json());
    for (const auto& f : j.value("backend_files", json::array())) m.backend_files.push_back(ref_from(f));
    m.with_confusion = j.value("with_confusion", false);
    m.without_context = j.value("without_context", false);
    m.repetitions = j.at("repetitions").get<int>();
    m.output_dir = j.at("output_dir").get<std::string>();
    m.created_at = j.value("created_at", std::string());
    m.outputs = j.value("outputs", std::vector<std::string>{});
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaViolation, std::string("run manifest: ") + e.what());
  }
}

fs::path write_run_manifest(const RunManifest& manifest, const fs::path& dir) {
  manifest.validate();
  ensure_dir(dir);
  auto path = dir / (manifest.run_id + kRunSuffix);
  std::error_code ec;
  if (fs::exists(path, ec)) throw Error(Errc::IoFailure, "run id '" + manifest.run_id + "' already exists in " + dir.string());
  io::write_file_atomic(path, manifest.to_json().dump(2) + "\n");
  return path;
}

}  // namespace cwalk::store
