// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "cwalk/app_graph.hpp"
#include "cwalk/engine.hpp"

namespace cwalk {

inline constexpr int kDefaultPort = 8787;

struct ServiceOptions {
  /// Probe vague think-aloud notes the way LLM evaluators are probed.
  bool probe = false;
  /// Offer clickable transition chips in session views.
  bool show_chips = true;
  /// Expose the resolved step count to the participant.
  bool show_step_count = false;
  /// Closed sessions are written here; unset keeps them in memory only.
  std::optional<std::filesystem::path> trace_dir;
  /// Static UI assets served at "/".
  std::optional<std::filesystem::path> static_dir;
  std::string run_id = "human";
  SessionConfig base_config = [] {
    SessionConfig c;
    c.complete_on_goal_arrival = false;
    return c;
  }();
  Clock clock = utc_now;
};

/// Transport-independent request handler for the human session API. All
/// participant-visible facilitator text originates here.
class SessionService {
 public:
  struct Response {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
  };

  SessionService(AppGraph graph, ServiceOptions options);

  Response handle(const std::string& method, const std::string& path, const std::string& body);

  const AppGraph& graph() const { return graph_; }
  const ServiceOptions& options() const { return options_; }

 private:
  struct Session {
    std::mutex mu;
    std::string participant;
    std::unique_ptr<Walkthrough> walk;
    std::optional<std::string> persisted_path;
  };

  Response list_tasks() const;
  Response create_session(const nlohmann::json& body);
  Response get_session(const std::string& id);
  Response post_step(const std::string& id, const nlohmann::json& body);
  Response complete(const std::string& id);
  Response get_trace(const std::string& id);
  Response get_screen(const std::string& id) const;

  std::shared_ptr<Session> find(const std::string& id);
  nlohmann::json view(const Session& s) const;
  /// Writes the trace of a just-closed session; returns an error response
  /// if that fails.
  std::optional<Response> persist(Session& s);

  AppGraph graph_;
  ServiceOptions options_;
  std::shared_mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::size_t next_id_ = 1;
};

/// Blocking HTTP front end for SessionService.
class HttpServer {
 public:
  explicit HttpServer(SessionService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds (port 0 picks a free port) and returns the bound port. Throws
  /// IoFailure.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cwalk
