// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cwalk/app_graph.hpp"

namespace cwalk {

enum class Role { system, facilitator, evaluator };

std::string_view to_string(Role r) noexcept;

struct ImageRef {
  ScreenId screen_id;
  std::filesystem::path path;

  bool operator==(const ImageRef&) const = default;
};

struct ChatTurn {
  Role role = Role::facilitator;
  std::string text;
  std::vector<ImageRef> images;

  bool operator==(const ChatTurn&) const = default;
};

/// Images only on facilitator turns; text non-empty unless images are
/// present; the history is non-empty. Throws SchemaViolation.
void check_history(std::span<const ChatTurn> history);

/// Identifies the caller so stateful backends (scripts) can keep one cursor
/// per session.
struct RequestContext {
  std::string session_id;
  std::string task_id;
  std::optional<ScreenId> screen_id;
};

class Backend {
 public:
  virtual ~Backend() = default;

  /// Returns the raw model text for the next evaluator turn.
  virtual std::string complete(std::span<const ChatTurn> history, const RequestContext& ctx) = 0;

  /// Free-text name recorded in traces (e.g. a model name).
  virtual std::string label() const = 0;
};

enum class BackendKind { remote_chat, scripted, replay };

std::string_view to_string(BackendKind k) noexcept;

struct BackendConfig {
  BackendKind kind = BackendKind::scripted;
  std::optional<std::string> endpoint;
  std::string model_label;
  /// Unset means "omit from the request", i.e. the provider default.
  std::optional<double> temperature;
  double timeout_s = 120.0;
  int max_retries = 2;
  std::chrono::milliseconds initial_backoff{1000};
  int max_concurrent = 4;
  /// Name of the environment variable holding the API key, never the key.
  std::optional<std::string> api_key_env;
  std::optional<std::filesystem::path> script_path;
  std::optional<std::filesystem::path> recording_path;

  /// Throws InvalidConfig when the kind-specific fields are inconsistent.
  void validate() const;

  static BackendConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  nlohmann::json to_json() const;
};

/// Canonical request form: turns with images reduced to (screen id, content
/// digest). Independent of process, host and image location.
nlohmann::json canonical_request(std::span<const ChatTurn> history);
std::string request_hash(std::span<const ChatTurn> history);

/// Pre-authored replies. The script is a JSON object keyed by
/// "<task>@<screen>", "<task>" or "*" (looked up in that order); each value is
/// either an array of replies or {"responses": [...], "repeat": bool}. A reply
/// that is not a string is serialized as compact JSON.
class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(nlohmann::json script, std::string label = "scripted");
  static std::unique_ptr<ScriptedBackend> from_file(const std::filesystem::path& path, std::string label = "");

  std::string complete(std::span<const ChatTurn> history, const RequestContext& ctx) override;
  std::string label() const override { return label_; }

 private:
  struct Entry {
    std::vector<std::string> responses;
    bool repeat = false;
  };
  const Entry* lookup(const RequestContext& ctx, std::string& key) const;

  std::map<std::string, Entry> entries_;
  std::string label_;
  std::mutex mu_;
  std::map<std::string, std::size_t> cursors_;
};

/// Serves responses recorded by RecordingBackend, matched by request hash.
/// Identical requests are answered in recording order.
class ReplayBackend final : public Backend {
 public:
  explicit ReplayBackend(const std::filesystem::path& recording, std::string label = "");

  std::string complete(std::span<const ChatTurn> history, const RequestContext& ctx) override;
  std::string label() const override { return label_; }

  /// The header record of the recording, or null if it has none.
  const nlohmann::json& header() const { return header_; }

 private:
  std::string label_;
  nlohmann::json header_;
  std::mutex mu_;
  std::map<std::string, std::deque<std::string>> responses_;
};

/// Passthrough that appends (request hash, response) records to a JSONL file.
class RecordingBackend final : public Backend {
 public:
  RecordingBackend(std::shared_ptr<Backend> wrapped, const std::filesystem::path& path, bool force,
                   nlohmann::json header);

  std::string complete(std::span<const ChatTurn> history, const RequestContext& ctx) override;
  std::string label() const override { return wrapped_->label(); }

 private:
  std::shared_ptr<Backend> wrapped_;
  std::filesystem::path path_;
  std::mutex mu_;
  std::ofstream out_;
};

/// Refuses to overwrite an existing recording unless `force`. Throws IoFailure.
std::shared_ptr<Backend> record_session(std::shared_ptr<Backend> wrapped, const std::filesystem::path& path,
                                        bool force = false, nlohmann::json header = nullptr);

/// Chat-completions style HTTP client with inline base64 images.
class RemoteChatBackend final : public Backend {
 public:
  /// Reads the API key from the configured environment variable once, here.
  explicit RemoteChatBackend(BackendConfig config);

  std::string complete(std::span<const ChatTurn> history, const RequestContext& ctx) override;
  std::string label() const override { return config_.model_label; }

  /// The request body that would be sent for `history`.
  nlohmann::json build_request(std::span<const ChatTurn> history) const;

 private:
  void acquire();
  void release();

  BackendConfig config_;
  std::string api_key_;
  std::string scheme_host_port_;
  std::string path_;
  std::mutex mu_;
  std::condition_variable cv_;
  int in_flight_ = 0;
};

std::shared_ptr<Backend> make_backend(const BackendConfig& config);

/// "scripted:<path>", "replay:<path>", or the path of a backend config JSON.
BackendConfig parse_backend_spec(std::string_view spec);

}  // namespace cwalk
