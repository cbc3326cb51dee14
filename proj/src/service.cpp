// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#include "cwalk/service.hpp"

#include <algorithm>
#include <cctype>
#include <iostream>

#include <httplib.h>

#include "cwalk/error.hpp"
#include "cwalk/io.hpp"
#include "cwalk/store.hpp"
#include "cwalk/text.hpp"

namespace cwalk {

using nlohmann::json;
using Response = SessionService::Response;

namespace {

Response json_response(int status, const json& body) { return {status, "application/json", body.dump()}; }

Response error_response(int status, std::string_view code, const std::string& message) {
  return json_response(status, {{"code", code}, {"message", message}});
}

Response error_response(const Error& e) {
  int status = 500;
  switch (e.code()) {
    case Errc::SessionClosed: status = 409; break;
    case Errc::UnknownScreen:
    case Errc::UnknownTask:
    case Errc::SchemaViolation:
    case Errc::ModeMismatch:
    case Errc::EmptyTask: status = 422; break;
    default: break;
  }
  // Strip the "Code: " prefix that what() carries.
  std::string message = e.what();
  const auto name = std::string(errc_name(e.code())) + ": ";
  if (message.rfind(name, 0) == 0) message.erase(0, name.size());
  return error_response(status, errc_name(e.code()), message);
}

std::string image_url(const ScreenId& id) { return "/api/screens/" + id; }

std::string content_type_for(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  if (ext == ".svg") return "image/svg+xml";
  return "application/octet-stream";
}

std::string sanitize_label(const std::string& label) {
  auto out = text::slug(label);
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.substr(0, 40);
}

json chips_for(const AppGraph& graph, const ScreenId& screen) {
  json chips = json::array();
  for (const auto& t : available_transitions(graph, screen)) {
    chips.push_back({{"id", t.action_label}, {"label", t.action_label}, {"kind", to_string(t.kind)}});
  }
  return chips;
}

/// The text shown in the banner: the fail-safe when present, else the
/// first message.
std::string banner_text(const std::vector<FacilitatorMessage>& messages) {
  for (const auto& m : messages) {
    if (m.kind == FacilitatorMessageKind::failsafe) return m.text;
  }
  return messages.empty() ? std::string() : messages.front().text;
}

json messages_json(const std::vector<FacilitatorMessage>& messages) {
  json out = json::array();
  for (const auto& m : messages) out.push_back({{"kind", to_string(m.kind)}, {"text", m.text}});
  return out;
}

}  // namespace

SessionService::SessionService(AppGraph graph, ServiceOptions options)
    : graph_(std::move(graph)), options_(std::move(options)) {
  options_.base_config.validate();
}

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& id) {
  std::shared_lock lock(sessions_mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

json SessionService::view(const Session& s) const {
  const auto& walk = *s.walk;
  const auto& trace = walk.trace();
  json steps = json::array();
  for (const auto& step : trace.steps) {
    json j{{"index", step.index},
           {"screen_id", step.screen},
           {"action", step_action_text(step)},
           {"advanced", step.resolved.has_value()},
           {"to", step.resolved ? json(step.resolved->to) : json(nullptr)},
           {"facilitator_messages", messages_json(step.facilitator_messages)}};
    if (step.response) {
      if (const auto* h = std::get_if<HumanStepInput>(&*step.response)) {
        j["think_aloud"] = h->think_aloud;
        j["confusion"] = h->confusion ? json(to_string(*h->confusion)) : json(nullptr);
      }
    }
    steps.push_back(std::move(j));
  }
  json v{{"session_id", trace.session_id},
         {"participant_label", s.participant},
         {"task_id", trace.task_id()},
         {"task_description", trace.task.description},
         {"with_confusion", trace.with_confusion},
         {"screen_id", walk.current_screen()},
         {"image_url", image_url(walk.current_screen())},
         {"closed", walk.closed()},
         {"outcome", trace.outcome ? json(to_string(*trace.outcome)) : json(nullptr)},
         {"show_chips", options_.show_chips},
         {"transitions", options_.show_chips && !walk.closed() ? chips_for(graph_, walk.current_screen()) : json::array()},
         {"steps", steps}};
  const bool last_rejected = !trace.steps.empty() && !trace.steps.back().resolved;
  v["facilitator_message"] = last_rejected ? json(banner_text(trace.steps.back().facilitator_messages)) : json(nullptr);
  if (options_.show_step_count) v["step_count"] = summarize(trace, trace.task).resolved_step_count;
  return v;
}

std::optional<Response> SessionService::persist(Session& s) {
  if (!options_.trace_dir || !s.walk->closed() || s.persisted_path) return std::nullopt;
  try {
    s.persisted_path = store::persist_trace(s.walk->trace(), *options_.trace_dir).string();
  } catch (const Error& e) {
    return error_response(e);
  }
  return std::nullopt;
}

Response SessionService::list_tasks() const {
  json tasks = json::array();
  for (const auto& t : graph_.tasks) {
    tasks.push_back({{"id", t.id}, {"description", t.description}, {"start_screen", t.start_screen}});
  }
  return json_response(200, {{"app", graph_.name}, {"tasks", tasks}});
}

Response SessionService::create_session(const json& body) {
  if (!body.is_object() || !body.contains("task_id") || !body["task_id"].is_string()) {
    return error_response(422, "SchemaViolation", "task_id (string) is required");
  }
  const auto task_id = body["task_id"].get<std::string>();
  const Task* task = graph_.find_task(task_id);
  if (!task) return error_response(422, "UnknownTask", "unknown task '" + task_id + "'");
  const auto participant = body.value("participant_label", std::string("anonymous"));

  auto config = options_.base_config;
  config.with_confusion = body.value("with_confusion", false);
  config.probe = options_.probe;
  config.complete_on_goal_arrival = false;

  auto session = std::make_shared<Session>();
  session->participant = participant;
  std::string id;
  {
    std::unique_lock lock(sessions_mu_);
    const auto label = sanitize_label(participant);
    id = "human-" + std::to_string(next_id_++) + (label.empty() ? "" : "-" + label) + "-" + sanitize_label(task->id);
    SessionIdentity identity{id, AgentKind::human, "human", options_.run_id, participant};
    session->walk = std::make_unique<Walkthrough>(graph_, *task, config, std::move(identity), options_.clock);
    sessions_.emplace(id, session);
  }
  return json_response(201, {{"session_id", id},
                             {"screen_id", task->start_screen},
                             {"image_url", image_url(task->start_screen)},
                             {"task_description", task->description},
                             {"with_confusion", config.with_confusion},
                             {"transitions", options_.show_chips ? chips_for(graph_, task->start_screen) : json::array()}});
}

Response SessionService::get_session(const std::string& id) {
  auto s = find(id);
  if (!s) return error_response(404, "UnknownSession", "no session '" + id + "'");
  std::lock_guard lock(s->mu);
  return json_response(200, view(*s));
}

Response SessionService::post_step(const std::string& id, const json& body) {
  auto s = find(id);
  if (!s) return error_response(404, "UnknownSession", "no session '" + id + "'");
  if (!body.is_object()) return error_response(422, "SchemaViolation", "step body must be a JSON object");
  std::lock_guard lock(s->mu);
  try {
    auto input = human_step_from_json(body);
    auto turn = s->walk->submit(std::move(input));
    if (auto err = persist(*s)) return *err;
    const auto& walk = *s->walk;
    json out{{"advanced", turn.advanced}, {"closed", walk.closed()},
             {"facilitator_messages", messages_json(turn.messages)}};
    if (walk.closed()) out["outcome"] = to_string(*walk.trace().outcome);
    if (turn.advanced) {
      out["screen_id"] = walk.current_screen();
      out["image_url"] = image_url(walk.current_screen());
      out["transitions"] = options_.show_chips && !walk.closed() ? chips_for(graph_, walk.current_screen()) : json::array();
    } else {
      out["facilitator_message"] = banner_text(turn.messages);
    }
    return json_response(200, out);
  } catch (const Error& e) {
    return error_response(e);
  } catch (const json::exception& e) {
    return error_response(422, "SchemaViolation", e.what());
  }
}

Response SessionService::complete(const std::string& id) {
  auto s = find(id);
  if (!s) return error_response(404, "UnknownSession", "no session '" + id + "'");
  std::lock_guard lock(s->mu);
  auto& walk = *s->walk;
  if (walk.closed()) return error_response(409, "SessionClosed", "session " + id + " is already closed");
  if (!walk.complete_if_on_goal()) {
    return error_response(422, "NotOnGoal",
                          "screen '" + walk.current_screen() + "' is not a goal screen for this task; keep going");
  }
  if (auto err = persist(*s)) return *err;
  const auto summary = summarize(walk.trace(), walk.task());
  return json_response(200, {{"session_id", id},
                             {"outcome", to_string(*walk.trace().outcome)},
                             {"steps", summary.resolved_step_count},
                             {"path", summary.path}});
}

Response SessionService::get_trace(const std::string& id) {
  auto s = find(id);
  if (!s) return error_response(404, "UnknownSession", "no session '" + id + "'");
  std::lock_guard lock(s->mu);
  return {200, "application/x-ndjson", to_jsonl(s->walk->trace())};
}

Response SessionService::get_screen(const std::string& id) const {
  const Screen* screen = graph_.find_screen(id);
  if (!screen) return error_response(404, "UnknownScreen", "no screen '" + id + "'");
  try {
    const auto path = graph_.image_path(*screen);
    return {200, content_type_for(path), io::read_file(path)};
  } catch (const Error& e) {
    return error_response(e);
  }
}

Response SessionService::handle(const std::string& method, const std::string& path, const std::string& body) {
  static constexpr std::string_view kSessions = "/api/sessions";
  static constexpr std::string_view kScreens = "/api/screens/";

  auto parse_body = [&]() -> std::optional<json> {
    json j = json::parse(body.empty() ? std::string("{}") : body, nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    return j;
  };

  if (path == "/api/tasks") {
    if (method != "GET") return error_response(405, "MethodNotAllowed", "use GET");
    return list_tasks();
  }
  if (path.rfind(kScreens, 0) == 0) {
    if (method != "GET") return error_response(405, "MethodNotAllowed", "use GET");
    return get_screen(path.substr(kScreens.size()));
  }
  if (path == kSessions) {
    if (method != "POST") return error_response(405, "MethodNotAllowed", "use POST");
    auto j = parse_body();
    if (!j) return error_response(422, "SchemaViolation", "body is not valid JSON");
    try {
      return create_session(*j);
    } catch (const json::exception& e) {
      return error_response(422, "SchemaViolation", e.what());
    }
  }
  if (path.rfind(std::string(kSessions) + "/", 0) == 0) {
    const auto rest = path.substr(kSessions.size() + 1);
    const auto slash = rest.find('/');
    const auto id = rest.substr(0, slash);
    const auto action = slash == std::string::npos ? std::string() : rest.substr(slash + 1);
    if (action.empty()) {
      if (method != "GET") return error_response(405, "MethodNotAllowed", "use GET");
      return get_session(id);
    }
    if (action == "trace") {
      if (method != "GET") return error_response(405, "MethodNotAllowed", "use GET");
      return get_trace(id);
    }
    if (action == "step" || action == "complete") {
      if (method != "POST") return error_response(405, "MethodNotAllowed", "use POST");
      if (action == "complete") return complete(id);
      auto j = parse_body();
      if (!j) return error_response(422, "SchemaViolation", "body is not valid JSON");
      return post_step(id, *j);
    }
  }
  return error_response(404, "NotFound", "no route for " + method + " " + path);
}

// ---------------------------------------------------------------------------
// HTTP front end

struct HttpServer::Impl {
  explicit Impl(SessionService& s) : service(s) {}
  SessionService& service;
  httplib::Server server;
};

HttpServer::HttpServer(SessionService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
    auto r = impl_->service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  srv.Get(R"(/api/.*)", dispatch);
  srv.Post(R"(/api/.*)", dispatch);
  if (const auto& dir = service.options().static_dir) {
    if (!srv.set_mount_point("/", dir->string())) {
      throw Error(Errc::IoFailure, "static directory " + dir->string() + " does not exist");
    }
  }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(Errc::IoFailure, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace cwalk
