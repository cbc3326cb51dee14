// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cwalk/app_graph.hpp"
#include "cwalk/backend.hpp"
#include "cwalk/engine.hpp"
#include "cwalk/protocol.hpp"

namespace cwalk {

enum class RatingMode { with_context, without_context };

std::string_view to_string(RatingMode m) noexcept;
std::optional<RatingMode> parse_rating_mode(std::string_view s) noexcept;

struct ScreenRating {
  std::string app_name;
  std::string task_id;
  ScreenId screen;
  ConfusionRating rating = ConfusionRating::not_at_all;
  BinaryRating binary = BinaryRating::not_confusing;
  std::string rationale;
  RatingMode mode = RatingMode::with_context;
  std::string run_label;

  bool operator==(const ScreenRating&) const = default;
};

/// The only way ratings are built, so `binary` always equals
/// collapse_rating(rating).
ScreenRating make_rating(std::string app_name, std::string task_id, ScreenId screen, ConfusionRating rating,
                         std::string rationale, RatingMode mode, std::string run_label);

/// One backend call with the without-context prompt and a single screenshot,
/// no history. Parse and transport failures become RatingFailed with the
/// original code as cause.
ScreenRating rate_without_context(const AppGraph& graph, const Screen& screen, const Task& task, Backend& backend,
                                  const PromptLibrary& prompts, const std::string& run_label);

struct RatingRequest {
  std::string task_id;
  ScreenId screen;
};

/// Rates each requested screen independently, at most `concurrency` at a
/// time. Output order follows `requests`. Throws UnknownTask/UnknownScreen
/// before any call is made.
std::vector<ScreenRating> rate_screens(const AppGraph& graph, const std::vector<RatingRequest>& requests,
                                       Backend& backend, const PromptLibrary& prompts, const std::string& run_label,
                                       int concurrency = 1);

/// One rating per (task, screen) visited in a with-confusion trace; repeat
/// visits keep the most severe rating. Throws ModeMismatch for plain traces.
std::vector<ScreenRating> extract_with_context_ratings(const SessionTrace& trace);

std::string to_jsonl(const std::vector<ScreenRating>& ratings);
std::vector<ScreenRating> ratings_from_jsonl(std::string_view text, const std::string& source = "ratings");

struct ItemKey {
  std::string task_id;
  ScreenId screen;

  auto operator<=>(const ItemKey&) const = default;
};

using RaterRow = std::map<ItemKey, BinaryRating>;

/// Rows are raters ("human" or a run label), columns are (task, screen)
/// items. Absent cells are items the rater never saw.
struct RatingMatrix {
  std::map<std::string, RaterRow> rows;

  std::set<ItemKey> columns() const;
  /// Binary vectors over the items both raters rated, in column order.
  std::pair<std::vector<BinaryRating>, std::vector<BinaryRating>> aligned(const std::string& a,
                                                                          const std::string& b) const;
};

struct HumanLabel {
  std::string task_id;
  ScreenId screen;
  bool confusing = false;
  std::optional<std::string> note;
};

/// JSONL of {task, screen, confusing, note?}.
std::vector<HumanLabel> human_labels_from_jsonl(std::string_view text, const std::string& source = "labels");
std::vector<HumanLabel> load_human_labels(const std::filesystem::path& path);

/// The tasks and screens a set of labels may refer to.
struct ScreenCatalog {
  std::set<std::string> tasks;
  std::set<ScreenId> screens;

  static ScreenCatalog from_graph(const AppGraph& graph);
  void merge(const ScreenCatalog& other);
};

/// Builds the "human" row from externally coded failure points. Throws
/// UnknownTask / UnknownScreen for labels outside `catalog`.
RaterRow human_failure_points(const std::vector<HumanLabel>& labels, const ScreenCatalog& catalog);

}  // namespace cwalk
