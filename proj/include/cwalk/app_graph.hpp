// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace cwalk {

using ScreenId = std::string;

enum class TransitionKind { tap, scroll, swipe, type, back };

std::string_view to_string(TransitionKind kind) noexcept;
std::optional<TransitionKind> parse_transition_kind(std::string_view s) noexcept;

struct Screen {
  ScreenId id;
  /// As written in the manifest, relative to the manifest directory.
  std::filesystem::path image;
  std::optional<std::string> title;

  bool operator==(const Screen&) const = default;
};

struct Transition {
  ScreenId from;
  std::string action_label;
  std::vector<std::string> synonyms;
  TransitionKind kind = TransitionKind::tap;
  ScreenId to;

  bool operator==(const Transition&) const = default;
};

struct Task {
  std::string id;
  std::string description;
  ScreenId start_screen;
  std::vector<ScreenId> goal_screens;
  std::vector<std::vector<ScreenId>> correct_paths;

  bool is_goal(std::string_view screen) const;
  bool operator==(const Task&) const = default;
};

/// An authored prototype app: screenshots plus the navigation logic between
/// them. Immutable once loaded; share it by const reference across sessions.
struct AppGraph {
  std::string name;
  std::vector<Screen> screens;
  std::vector<Transition> transitions;
  std::vector<Task> tasks;
  /// Directory that relative image paths resolve against.
  std::filesystem::path base_dir;

  const Screen* find_screen(std::string_view id) const;
  const Task* find_task(std::string_view id) const;
  const Transition* find_transition(std::string_view from, std::string_view to) const;
  std::filesystem::path image_path(const Screen& screen) const;

  bool operator==(const AppGraph&) const = default;
};

enum class FindingRule {
  DuplicateId,
  DuplicateTransition,
  InvalidId,
  EmptyAction,
  DanglingReference,
  MissingImage,
  EmptyGoalSet,
  EmptyDescription,
  InvalidCorrectPath,
  DeadEnd,
};

std::string_view to_string(FindingRule rule) noexcept;

struct Finding {
  FindingRule rule;
  std::string entity;
  std::string message;
};

std::vector<Finding> validate_graph(const AppGraph& graph);

/// Parses a manifest document without validating it. Throws ManifestSyntax.
AppGraph parse_app_graph(const nlohmann::json& doc, std::filesystem::path base_dir);

/// Parse, resolve images against the manifest's directory, validate. The first
/// finding decides the error code; the message lists every finding.
AppGraph load_app_graph(const std::filesystem::path& manifest_path);

nlohmann::json to_json(const AppGraph& graph);

/// Outgoing transitions of `screen` in manifest order. Throws UnknownScreen.
std::vector<Transition> available_transitions(const AppGraph& graph, std::string_view screen);

}  // namespace cwalk
