// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#include "cwalk/app_graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <utility>

#include "cwalk/error.hpp"
#include "cwalk/text.hpp"

namespace cwalk {

using nlohmann::json;

std::string_view to_string(TransitionKind kind) noexcept {
  switch (kind) {
    case TransitionKind::tap: return "tap";
    case TransitionKind::scroll: return "scroll";
    case TransitionKind::swipe: return "swipe";
    case TransitionKind::type: return "type";
    case TransitionKind::back: return "back";
  }
  return "tap";
}

std::optional<TransitionKind> parse_transition_kind(std::string_view s) noexcept {
  if (s == "tap") return TransitionKind::tap;
  if (s == "scroll") return TransitionKind::scroll;
  if (s == "swipe") return TransitionKind::swipe;
  if (s == "type") return TransitionKind::type;
  if (s == "back") return TransitionKind::back;
  return std::nullopt;
}

std::string_view to_string(FindingRule rule) noexcept {
  switch (rule) {
    case FindingRule::DuplicateId: return "DuplicateId";
    case FindingRule::DuplicateTransition: return "DuplicateTransition";
    case FindingRule::InvalidId: return "InvalidId";
    case FindingRule::EmptyAction: return "EmptyAction";
    case FindingRule::DanglingReference: return "DanglingReference";
    case FindingRule::MissingImage: return "MissingImage";
    case FindingRule::EmptyGoalSet: return "EmptyGoalSet";
    case FindingRule::EmptyDescription: return "EmptyDescription";
    case FindingRule::InvalidCorrectPath: return "InvalidCorrectPath";
    case FindingRule::DeadEnd: return "DeadEnd";
  }
  return "Unknown";
}

bool Task::is_goal(std::string_view screen) const {
  return std::find(goal_screens.begin(), goal_screens.end(), screen) != goal_screens.end();
}

const Screen* AppGraph::find_screen(std::string_view id) const {
  auto it = std::find_if(screens.begin(), screens.end(), [&](const Screen& s) { return s.id == id; });
  return it == screens.end() ? nullptr : &*it;
}

const Task* AppGraph::find_task(std::string_view id) const {
  auto it = std::find_if(tasks.begin(), tasks.end(), [&](const Task& t) { return t.id == id; });
  return it == tasks.end() ? nullptr : &*it;
}

const Transition* AppGraph::find_transition(std::string_view from, std::string_view to) const {
  auto it = std::find_if(transitions.begin(), transitions.end(),
                         [&](const Transition& t) { return t.from == from && t.to == to; });
  return it == transitions.end() ? nullptr : &*it;
}

std::filesystem::path AppGraph::image_path(const Screen& screen) const {
  if (screen.image.is_absolute()) return screen.image;
  return base_dir / screen.image;
}

namespace {

[[noreturn]] void syntax(const std::string& what) { throw Error(Errc::ManifestSyntax, what); }

const json& field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) syntax(where + ": missing field '" + key + "'");
  return *it;
}

std::string string_field(const json& obj, const char* key, const std::string& where) {
  const auto& v = field(obj, key, where);
  if (!v.is_string()) syntax(where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<std::string> string_list(const json& v, const std::string& where) {
  if (!v.is_array()) syntax(where + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& item : v) {
    if (!item.is_string()) syntax(where + " must be an array of strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

const json& array_field(const json& obj, const char* key, const std::string& where) {
  const auto& v = field(obj, key, where);
  if (!v.is_array()) syntax(where + ": field '" + key + "' must be an array");
  return v;
}

bool valid_token(const std::string& id) {
  static const std::regex kToken("[A-Za-z0-9_#.-]+");
  return std::regex_match(id, kToken);
}

}  // namespace

AppGraph parse_app_graph(const json& doc, std::filesystem::path base_dir) {
  if (!doc.is_object()) syntax("manifest root must be an object");
  AppGraph g;
  g.base_dir = std::move(base_dir);
  g.name = string_field(doc, "name", "manifest");

  for (const auto& s : array_field(doc, "screens", "manifest")) {
    if (!s.is_object()) syntax("screens[] entries must be objects");
    Screen screen;
    screen.id = string_field(s, "id", "screen");
    const std::string where = "screen '" + screen.id + "'";
    screen.image = string_field(s, "image", where);
    if (s.contains("title")) {
      if (!s["title"].is_string()) syntax(where + ": field 'title' must be a string");
      screen.title = s["title"].get<std::string>();
    }
    g.screens.push_back(std::move(screen));
  }

  for (const auto& t : array_field(doc, "transitions", "manifest")) {
    if (!t.is_object()) syntax("transitions[] entries must be objects");
    Transition tr;
    tr.from = string_field(t, "from", "transition");
    tr.action_label = string_field(t, "action", "transition from '" + tr.from + "'");
    const std::string where = "transition '" + tr.from + "' / '" + tr.action_label + "'";
    tr.to = string_field(t, "to", where);
    const auto kind = string_field(t, "kind", where);
    auto parsed = parse_transition_kind(kind);
    if (!parsed) syntax(where + ": unknown kind '" + kind + "'");
    tr.kind = *parsed;
    if (t.contains("synonyms")) tr.synonyms = string_list(t["synonyms"], where + " synonyms");
    g.transitions.push_back(std::move(tr));
  }

  if (doc.contains("tasks")) {
    for (const auto& t : array_field(doc, "tasks", "manifest")) {
      if (!t.is_object()) syntax("tasks[] entries must be objects");
      Task task;
      task.id = string_field(t, "id", "task");
      const std::string where = "task '" + task.id + "'";
      task.description = string_field(t, "description", where);
      task.start_screen = string_field(t, "start", where);
      task.goal_screens = string_list(field(t, "goals", where), where + " goals");
      const auto& paths = t.contains("correct_paths") ? t["correct_paths"] : json::array();
      if (!paths.is_array()) syntax(where + ": correct_paths must be an array");
      for (const auto& p : paths) task.correct_paths.push_back(string_list(p, where + " correct_paths[]"));
      g.tasks.push_back(std::move(task));
    }
  }
  return g;
}

json to_json(const AppGraph& graph) {
  json doc;
  doc["name"] = graph.name;
  doc["screens"] = json::array();
  for (const auto& s : graph.screens) {
    json j{{"id", s.id}, {"image", s.image.generic_string()}};
    if (s.title) j["title"] = *s.title;
    doc["screens"].push_back(std::move(j));
  }
  doc["transitions"] = json::array();
  for (const auto& t : graph.transitions) {
    json j{{"from", t.from}, {"action", t.action_label}, {"kind", to_string(t.kind)}, {"to", t.to}};
    if (!t.synonyms.empty()) j["synonyms"] = t.synonyms;
    doc["transitions"].push_back(std::move(j));
  }
  doc["tasks"] = json::array();
  for (const auto& t : graph.tasks) {
    doc["tasks"].push_back({{"id", t.id},
                            {"description", t.description},
                            {"start", t.start_screen},
                            {"goals", t.goal_screens},
                            {"correct_paths", t.correct_paths}});
  }
  return doc;
}

std::vector<Finding> validate_graph(const AppGraph& g) {
  std::vector<Finding> out;
  auto add = [&](FindingRule rule, std::string entity, std::string message) {
    out.push_back({rule, std::move(entity), std::move(message)});
  };

  std::set<std::string> screen_ids;
  for (const auto& s : g.screens) {
    if (!valid_token(s.id)) add(FindingRule::InvalidId, "screen '" + s.id + "'", "id is not a valid token");
    if (!screen_ids.insert(s.id).second) {
      add(FindingRule::DuplicateId, "screen '" + s.id + "'", "screen id declared more than once");
    }
  }
  std::set<std::string> task_ids;
  for (const auto& t : g.tasks) {
    if (!valid_token(t.id)) add(FindingRule::InvalidId, "task '" + t.id + "'", "id is not a valid token");
    if (!task_ids.insert(t.id).second) {
      add(FindingRule::DuplicateId, "task '" + t.id + "'", "task id declared more than once");
    }
  }

  std::set<std::pair<std::string, std::string>> edges;
  for (const auto& t : g.transitions) {
    const std::string entity = "transition '" + t.from + "' / '" + t.action_label + "'";
    if (text::trim(t.action_label).empty()) add(FindingRule::EmptyAction, entity, "action label is empty");
    if (!edges.emplace(t.from, t.action_label).second) {
      add(FindingRule::DuplicateTransition, entity, "(from, action) pair declared more than once");
    }
    if (!screen_ids.count(t.from)) add(FindingRule::DanglingReference, entity, "unknown from screen '" + t.from + "'");
    if (!screen_ids.count(t.to)) add(FindingRule::DanglingReference, entity, "unknown to screen '" + t.to + "'");
  }
  for (const auto& t : g.tasks) {
    const std::string entity = "task '" + t.id + "'";
    if (!screen_ids.count(t.start_screen)) {
      add(FindingRule::DanglingReference, entity, "unknown start screen '" + t.start_screen + "'");
    }
    for (const auto& goal : t.goal_screens) {
      if (!screen_ids.count(goal)) add(FindingRule::DanglingReference, entity, "unknown goal screen '" + goal + "'");
    }
  }

  for (const auto& s : g.screens) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(g.image_path(s), ec)) {
      add(FindingRule::MissingImage, "screen '" + s.id + "'", "image not found: " + g.image_path(s).string());
    }
  }

  std::set<std::string> all_goals;
  for (const auto& t : g.tasks) {
    const std::string entity = "task '" + t.id + "'";
    if (t.goal_screens.empty()) add(FindingRule::EmptyGoalSet, entity, "goal set is empty");
    if (text::trim(t.description).empty()) add(FindingRule::EmptyDescription, entity, "description is empty");
    all_goals.insert(t.goal_screens.begin(), t.goal_screens.end());

    for (std::size_t p = 0; p < t.correct_paths.size(); ++p) {
      const auto& path = t.correct_paths[p];
      const std::string where = entity + " correct_paths[" + std::to_string(p) + "]";
      if (path.empty()) {
        add(FindingRule::InvalidCorrectPath, where, "path is empty");
        continue;
      }
      bool dangling = false;
      for (const auto& s : path) {
        if (!screen_ids.count(s)) {
          add(FindingRule::DanglingReference, where, "unknown screen '" + s + "'");
          dangling = true;
        }
      }
      if (dangling) continue;
      if (path.front() != t.start_screen) {
        add(FindingRule::InvalidCorrectPath, where, "does not begin at start screen '" + t.start_screen + "'");
      }
      if (!t.is_goal(path.back())) {
        add(FindingRule::InvalidCorrectPath, where, "does not end in a goal screen");
      }
      for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        if (!g.find_transition(path[i], path[i + 1])) {
          add(FindingRule::InvalidCorrectPath, where, "no transition " + path[i] + " -> " + path[i + 1]);
        }
      }
    }
  }

  // Reachable non-goal screens must offer a way forward.
  std::set<std::string> seen;
  std::deque<std::string> frontier;
  for (const auto& t : g.tasks) {
    if (screen_ids.count(t.start_screen) && seen.insert(t.start_screen).second) frontier.push_back(t.start_screen);
  }
  while (!frontier.empty()) {
    auto cur = std::move(frontier.front());
    frontier.pop_front();
    bool has_out = false;
    for (const auto& t : g.transitions) {
      if (t.from != cur) continue;
      has_out = true;
      if (screen_ids.count(t.to) && seen.insert(t.to).second) frontier.push_back(t.to);
    }
    if (!has_out && !all_goals.count(cur)) {
      add(FindingRule::DeadEnd, "screen '" + cur + "'", "reachable non-goal screen has no outgoing transition");
    }
  }
  return out;
}

namespace {

Errc errc_for(FindingRule rule) {
  switch (rule) {
    case FindingRule::InvalidId: return Errc::ManifestSyntax;
    case FindingRule::DanglingReference: return Errc::DanglingReference;
    case FindingRule::MissingImage: return Errc::MissingImage;
    case FindingRule::InvalidCorrectPath: return Errc::InvalidCorrectPath;
    default: return Errc::InvalidGraph;
  }
}

}  // namespace

AppGraph load_app_graph(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(Errc::ManifestSyntax, "cannot read manifest " + manifest_path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::ManifestSyntax, manifest_path.string() + ": " + e.what());
  }
  auto graph = parse_app_graph(doc, manifest_path.parent_path());
  auto findings = validate_graph(graph);
  if (!findings.empty()) {
    std::ostringstream msg;
    msg << manifest_path.string() << ":";
    for (const auto& f : findings) msg << "\n  " << to_string(f.rule) << " " << f.entity << ": " << f.message;
    throw Error(errc_for(findings.front().rule), msg.str());
  }
  return graph;
}

std::vector<Transition> available_transitions(const AppGraph& graph, std::string_view screen) {
  if (!graph.find_screen(screen)) throw Error(Errc::UnknownScreen, "unknown screen '" + std::string(screen) + "'");
  std::vector<Transition> out;
  for (const auto& t : graph.transitions) {
    if (t.from == screen) out.push_back(t);
  }
  return out;
}

}  // namespace cwalk
