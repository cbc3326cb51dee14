// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cwalk/backend.hpp"
#include "cwalk/engine.hpp"
#include "cwalk/metrics.hpp"
#include "cwalk/rater.hpp"
#include "cwalk/store.hpp"

namespace cwalk {

namespace fs = std::filesystem;

/// Orchestration shared by the command-line tool and the Python module.

struct WalkOptions {
  fs::path manifest;
  /// Empty runs every task of the app, in manifest order.
  std::vector<std::string> task_ids;
  BackendConfig backend;
  /// Overrides the backend's own label in traces.
  std::optional<std::string> label;
  int runs = 1;
  SessionConfig session;
  fs::path out_dir;
  std::string run_id;
  std::optional<fs::path> record;
  bool force = false;
  /// Fixed timestamp for every clock reading; unset uses wall time.
  std::optional<std::string> timestamp;
  fs::path prompts_dir;
};

struct WalkResult {
  std::vector<SessionTrace> traces;
  std::vector<fs::path> trace_files;
  fs::path run_manifest;
};

/// Runs `runs` repetitions of every selected task, sequentially, and writes
/// one trace per session plus a run manifest to `out_dir`. Session ids are
/// "<run_id>-<label>-run<k>-<task>".
WalkResult run_walk(const WalkOptions& options);

/// Rebuilds the options of a recorded walk so it can be re-run against the
/// replay backend. `manifest` overrides the recorded manifest path.
WalkOptions walk_options_from_recording(const fs::path& recording, const fs::path& out_dir,
                                        const std::optional<fs::path>& manifest = std::nullopt);

struct RateOptions {
  fs::path manifest;
  /// JSONL of {"task": ..., "screen": ...}.
  fs::path screens_file;
  BackendConfig backend;
  std::optional<std::string> label;
  fs::path out_file;
  std::string run_id;
  std::optional<fs::path> record;
  bool force = false;
  std::optional<std::string> timestamp;
  int concurrency = 1;
  fs::path prompts_dir;
};

struct RateResult {
  std::vector<ScreenRating> ratings;
  fs::path run_manifest;
};

std::vector<RatingRequest> load_screen_requests(const fs::path& path);

RateResult run_rate_screens(const RateOptions& options);

struct MetricsOptions {
  fs::path traces_dir;
  std::optional<fs::path> ratings;
  std::optional<fs::path> human_labels;
  /// Label catalog; without it the catalog comes from the traces and ratings.
  std::optional<fs::path> manifest;
  fs::path out_dir;
  GroupBy group_by = GroupBy::agent_kind;
  double alpha = 0.0;
};

struct MetricsResult {
  MetricsReport report;
  fs::path csv;
  fs::path summary;
  std::vector<store::LoadIssue> issues;
};

/// Writes metrics.csv and summary.md to `out_dir`. Malformed trace files are
/// skipped and returned as issues.
MetricsResult run_metrics(const MetricsOptions& options);

}  // namespace cwalk
