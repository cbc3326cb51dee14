// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

// Helpers shared by the unit and acceptance suites.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "cwalk/app_graph.hpp"

namespace cwalk::testing {

namespace fs = std::filesystem;
using nlohmann::json;

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "cwalk-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::permissions(path_, fs::perms::owner_all, fs::perm_options::add, ec);
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const fs::path& p) const { return path_ / p; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& path, std::string_view text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes `manifest` as app.json plus a placeholder image per screen and
/// returns the manifest path.
inline fs::path write_app(const fs::path& dir, const json& manifest) {
  for (const auto& s : manifest.at("screens")) {
    write_text(dir / s.at("image").get<std::string>(), "img:" + s.at("id").dump());
  }
  write_text(dir / "app.json", manifest.dump(2));
  return dir / "app.json";
}

inline json screen_json(const std::string& id) { return {{"id", id}, {"image", "img/" + id + ".png"}}; }

inline json edge_json(const std::string& from, const std::string& action, const std::string& to,
                      const std::string& kind = "tap") {
  return {{"from", from}, {"action", action}, {"kind", kind}, {"to", to}};
}

/// Two screens, A -> B "tap next", one task from A to B.
inline json minimal_manifest() {
  return {{"name", "mini"},
          {"screens", {screen_json("A"), screen_json("B")}},
          {"transitions", {edge_json("A", "tap next", "B")}},
          {"tasks",
           {{{"id", "t1"}, {"description", "Go to B."}, {"start", "A"}, {"goals", {"B"}}, {"correct_paths", json::array({json::array({"A", "B"})})}}}}};
}

/// A -> B -> C with C -> B and C -> D; the goal D is only reached by
/// "tap d", so an evaluator alternating "tap b" / "tap c" loops between B
/// and C.
inline json loop_manifest() {
  return {{"name", "loop"},
          {"screens", {screen_json("A"), screen_json("B"), screen_json("C"), screen_json("D")}},
          {"transitions",
           {edge_json("A", "tap b", "B"), edge_json("B", "tap c", "C"), edge_json("C", "tap b", "B"),
            edge_json("C", "tap d", "D")}},
          {"tasks",
           {{{"id", "reach_d"},
             {"description", "Reach screen D."},
             {"start", "A"},
             {"goals", {"D"}},
             {"correct_paths", json::array({json::array({"A", "B", "C", "D"})})}}}}};
}

/// A well-formed evaluator reply choosing `action`.
inline std::string reply(const std::string& action, const std::string& confusion = "not at all confusing",
                         const std::string& rationale = "This looks like the way forward for the task.") {
  return json{{"current_state", "a screen"},
              {"possible_actions", {{{"action", action}, {"rationale", rationale}, {"confidence", "high"}}}},
              {"next_action", action},
              {"next_action_rationale", rationale},
              {"confusing_or_not", confusion},
              {"confusing_or_not_rationale", "rated for the test"}}
      .dump();
}

inline fs::path fixtures_dir() { return CWALK_FIXTURES_DIR; }
inline fs::path prompts_dir() { return CWALK_PROMPTS_DIR; }

}  // namespace cwalk::testing
