// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cwalk/engine.hpp"
#include "cwalk/rater.hpp"

namespace cwalk::store {

namespace fs = std::filesystem;

inline constexpr const char* kTraceSuffix = ".trace.jsonl";
inline constexpr const char* kRatingsSuffix = ".ratings.jsonl";
inline constexpr const char* kRunSuffix = ".run.json";

/// "<dir>/<session_id>.trace.jsonl"
fs::path trace_path(const fs::path& dir, const std::string& session_id);

/// Atomic write (temp file + rename). Creates `dir` if needed. Throws
/// IoFailure.
fs::path persist_trace(const SessionTrace& trace, const fs::path& dir);

struct LoadIssue {
  fs::path file;
  std::string message;
};

template <typename T>
struct Loaded {
  std::vector<T> items;
  /// Files that contributed to `items`, in load order.
  std::vector<fs::path> files;
  /// Files skipped because they failed schema validation.
  std::vector<LoadIssue> issues;
};

/// Every *.trace.jsonl in `dir`, in file-name order. Malformed files are
/// skipped and reported. Throws IoFailure when `dir` cannot be listed.
Loaded<SessionTrace> load_traces(const fs::path& dir);

/// A single ratings file, or every *.ratings.jsonl in a directory.
Loaded<ScreenRating> load_ratings(const fs::path& file_or_dir);

/// (file name, sha256) pairs for report provenance.
std::vector<std::pair<std::string, std::string>> provenance_of(const std::vector<fs::path>& files);

struct SourceRef {
  fs::path path;
  std::string sha256;

  bool operator==(const SourceRef&) const = default;
};

/// What a CLI run did, enough to repeat it.
struct RunManifest {
  std::string run_id;
  std::string command;
  SourceRef app_manifest;
  std::vector<std::string> task_ids;
  nlohmann::json backend = nullptr;
  /// Script, replay or recording files the backend read or wrote.
  std::vector<SourceRef> backend_files;
  bool with_confusion = false;
  bool without_context = false;
  int repetitions = 1;
  fs::path output_dir;
  std::string created_at;
  std::vector<std::string> outputs;

  /// Throws InvalidConfig.
  void validate() const;
  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  bool operator==(const RunManifest&) const = default;
};

SourceRef source_ref(const fs::path& file);

/// Writes "<dir>/<run_id>.run.json". Throws IoFailure when a manifest with
/// this run id already exists there.
fs::path write_run_manifest(const RunManifest& manifest, const fs::path& dir);

}  // namespace cwalk::store
