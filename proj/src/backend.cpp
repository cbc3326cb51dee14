// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#include "cwalk/backend.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "cwalk/error.hpp"
#include "cwalk/io.hpp"

namespace cwalk {

using nlohmann::json;

std::string_view to_string(Role r) noexcept {
  switch (r) {
    case Role::system: return "system";
    case Role::facilitator: return "facilitator";
    case Role::evaluator: return "evaluator";
  }
  return "facilitator";
}

std::string_view to_string(BackendKind k) noexcept {
  switch (k) {
    case BackendKind::remote_chat: return "remote_chat";
    case BackendKind::scripted: return "scripted";
    case BackendKind::replay: return "replay";
  }
  return "scripted";
}

void check_history(std::span<const ChatTurn> history) {
  if (history.empty()) throw Error(Errc::SchemaViolation, "chat history is empty");
  for (const auto& turn : history) {
    if (!turn.images.empty() && turn.role != Role::facilitator) {
      throw Error(Errc::SchemaViolation, "images are only allowed on facilitator turns");
    }
    if (turn.text.empty() && turn.images.empty()) throw Error(Errc::SchemaViolation, "empty chat turn");
  }
}

// ---------------------------------------------------------------------------
// Config

void BackendConfig::validate() const {
  const bool remote = kind == BackendKind::remote_chat;
  if (remote != endpoint.has_value()) {
    throw Error(Errc::InvalidConfig, remote ? "remote_chat requires an endpoint" : "endpoint is only valid for remote_chat");
  }
  if ((kind == BackendKind::scripted) != script_path.has_value()) {
    throw Error(Errc::InvalidConfig, kind == BackendKind::scripted ? "scripted requires script_path"
                                                                   : "script_path is only valid for scripted");
  }
  if (kind == BackendKind::replay && !recording_path) throw Error(Errc::InvalidConfig, "replay requires recording_path");
  if (temperature && *temperature < 0) throw Error(Errc::InvalidConfig, "temperature must be >= 0");
  if (max_retries < 0) throw Error(Errc::InvalidConfig, "max_retries must be >= 0");
  if (max_concurrent < 1) throw Error(Errc::InvalidConfig, "max_concurrent must be >= 1");
  if (timeout_s <= 0) throw Error(Errc::InvalidConfig, "timeout must be positive");
}

BackendConfig BackendConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw Error(Errc::InvalidConfig, "backend config must be an object");
  BackendConfig c;
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "remote_chat") c.kind = BackendKind::remote_chat;
    else if (kind == "scripted") c.kind = BackendKind::scripted;
    else if (kind == "replay") c.kind = BackendKind::replay;
    else throw Error(Errc::InvalidConfig, "unknown backend kind '" + kind + "'");
    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };
    if (j.contains("endpoint")) c.endpoint = j["endpoint"].get<std::string>();
    c.model_label = j.value("model_label", std::string(to_string(c.kind)));
    if (j.contains("temperature") && !j["temperature"].is_null()) c.temperature = j["temperature"].get<double>();
    c.timeout_s = j.value("timeout", c.timeout_s);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.initial_backoff = std::chrono::milliseconds(j.value("initial_backoff_ms", c.initial_backoff.count()));
    c.max_concurrent = j.value("max_concurrent", c.max_concurrent);
    if (j.contains("api_key_env")) c.api_key_env = j["api_key_env"].get<std::string>();
    if (j.contains("script_path")) c.script_path = resolve(j["script_path"].get<std::string>());
    if (j.contains("recording_path")) c.recording_path = resolve(j["recording_path"].get<std::string>());
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, e.what());
  }
  c.validate();
  return c;
}

json BackendConfig::to_json() const {
  json j{{"kind", to_string(kind)},
         {"model_label", model_label},
         {"timeout", timeout_s},
         {"max_retries", max_retries},
         {"initial_backoff_ms", initial_backoff.count()},
         {"max_concurrent", max_concurrent}};
  if (endpoint) j["endpoint"] = *endpoint;
  if (temperature) j["temperature"] = *temperature;
  if (api_key_env) j["api_key_env"] = *api_key_env;
  if (script_path) j["script_path"] = script_path->generic_string();
  if (recording_path) j["recording_path"] = recording_path->generic_string();
  return j;
}

BackendConfig parse_backend_spec(std::string_view spec) {
  auto starts = [&](std::string_view p) { return spec.substr(0, p.size()) == p; };
  BackendConfig c;
  if (starts("scripted:")) {
    c.kind = BackendKind::scripted;
    c.script_path = std::filesystem::path(spec.substr(9));
    c.model_label = "scripted";
  } else if (starts("replay:")) {
    c.kind = BackendKind::replay;
    c.recording_path = std::filesystem::path(spec.substr(7));
    c.model_label = "replay";
  } else {
    const std::filesystem::path path(spec);
    json j;
    try {
      j = json::parse(io::read_file(path));
    } catch (const json::exception& e) {
      throw Error(Errc::InvalidConfig, path.string() + ": " + e.what());
    }
    return BackendConfig::from_json(j, path.parent_path());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Hashing

json canonical_request(std::span<const ChatTurn> history) {
  json turns = json::array();
  for (const auto& t : history) {
    json images = json::array();
    for (const auto& img : t.images) {
      images.push_back({{"screen", img.screen_id}, {"sha256", io::sha256_hex(io::read_file(img.path))}});
    }
    turns.push_back({{"role", to_string(t.role)}, {"text", t.text}, {"images", std::move(images)}});
  }
  return turns;
}

std::string request_hash(std::span<const ChatTurn> history) {
  // nlohmann keeps object keys sorted, so dump() is canonical.
  return io::sha256_hex(canonical_request(history).dump());
}

// ---------------------------------------------------------------------------
// Scripted

namespace {

std::string reply_text(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

ScriptedBackend::ScriptedBackend(json script, std::string label) : label_(std::move(label)) {
  if (!script.is_object()) throw Error(Errc::InvalidConfig, "script must be a JSON object");
  for (const auto& [key, value] : script.items()) {
    Entry e;
    const json* list = &value;
    if (value.is_object()) {
      if (!value.contains("responses")) throw Error(Errc::InvalidConfig, "script entry '" + key + "' lacks responses");
      list = &value["responses"];
      e.repeat = value.value("repeat", false);
    }
    if (!list->is_array()) throw Error(Errc::InvalidConfig, "script entry '" + key + "' must be an array");
    for (const auto& r : *list) e.responses.push_back(reply_text(r));
    entries_.emplace(key, std::move(e));
  }
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path, std::string label) {
  json script;
  try {
    script = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, path.string() + ": " + e.what());
  }
  return std::make_unique<ScriptedBackend>(std::move(script), label.empty() ? "scripted" : std::move(label));
}

const ScriptedBackend::Entry* ScriptedBackend::lookup(const RequestContext& ctx, std::string& key) const {
  std::vector<std::string> keys;
  if (ctx.screen_id) keys.push_back(ctx.task_id + "@" + *ctx.screen_id);
  keys.push_back(ctx.task_id);
  keys.emplace_back("*");
  for (auto& k : keys) {
    auto it = entries_.find(k);
    if (it != entries_.end()) {
      key = k;
      return &it->second;
    }
  }
  return nullptr;
}

std::string ScriptedBackend::complete(std::span<const ChatTurn> history, const RequestContext& ctx) {
  check_history(history);
  std::string key;
  const Entry* entry = lookup(ctx, key);
  if (!entry || entry->responses.empty()) {
    throw Error(Errc::ScriptExhausted, "no scripted responses for task '" + ctx.task_id + "'");
  }
  std::lock_guard lock(mu_);
  auto& cursor = cursors_[ctx.session_id + "\x1f" + key];
  if (cursor >= entry->responses.size()) {
    if (!entry->repeat) {
      throw Error(Errc::ScriptExhausted, "script '" + key + "' exhausted after " +
                                             std::to_string(entry->responses.size()) + " responses");
    }
    cursor = 0;
  }
  return entry->responses[cursor++];
}

// ---------------------------------------------------------------------------
// Record / replay

ReplayBackend::ReplayBackend(const std::filesystem::path& recording, std::string label) : label_(std::move(label)) {
  std::ifstream in(recording);
  if (!in) throw Error(Errc::IoFailure, "cannot open recording " + recording.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) {
      throw Error(Errc::SchemaViolation, recording.string() + ":" + std::to_string(lineno) + ": not a JSON record");
    }
    const auto type = rec.value("type", std::string("exchange"));
    if (type == "header") {
      header_ = rec;
      continue;
    }
    if (!rec.contains("hash") || !rec.contains("response") || !rec["hash"].is_string() ||
        !rec["response"].is_string()) {
      throw Error(Errc::SchemaViolation, recording.string() + ":" + std::to_string(lineno) + ": bad exchange record");
    }
    responses_[rec["hash"].get<std::string>()].push_back(rec["response"].get<std::string>());
  }
  if (label_.empty()) {
    label_ = header_.is_object() ? header_.value("backend_label", std::string("replay")) : std::string("replay");
  }
}

std::string ReplayBackend::complete(std::span<const ChatTurn> history, const RequestContext&) {
  check_history(history);
  const auto hash = request_hash(history);
  std::lock_guard lock(mu_);
  auto it = responses_.find(hash);
  if (it == responses_.end() || it->second.empty()) {
    throw Error(Errc::ReplayMiss, "no recorded response for request " + hash.substr(0, 16));
  }
  auto text = std::move(it->second.front());
  it->second.pop_front();
  return text;
}

RecordingBackend::RecordingBackend(std::shared_ptr<Backend> wrapped, const std::filesystem::path& path, bool force,
                                   json header)
    : wrapped_(std::move(wrapped)), path_(path) {
  std::error_code ec;
  if (std::filesystem::exists(path, ec) && !force) {
    throw Error(Errc::IoFailure, "recording " + path.string() + " already exists (use force to overwrite)");
  }
  out_.open(path, std::ios::trunc);
  if (!out_) throw Error(Errc::IoFailure, "cannot write recording " + path.string());
  if (header.is_null()) header = json::object();
  header["type"] = "header";
  header["format"] = "cwalk-recording/1";
  header["backend_label"] = wrapped_->label();
  out_ << header.dump() << '\n';
  out_.flush();
  if (!out_) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

std::string RecordingBackend::complete(std::span<const ChatTurn> history, const RequestContext& ctx) {
  const auto hash = request_hash(history);
  auto text = wrapped_->complete(history, ctx);
  json rec{{"type", "exchange"}, {"hash", hash}, {"session_id", ctx.session_id}, {"task_id", ctx.task_id},
           {"response", text}};
  std::lock_guard lock(mu_);
  out_ << rec.dump() << '\n';
  out_.flush();
  if (!out_) throw Error(Errc::IoFailure, "write failed for " + path_.string());
  return text;
}

std::shared_ptr<Backend> record_session(std::shared_ptr<Backend> wrapped, const std::filesystem::path& path,
                                        bool force, json header) {
  return std::make_shared<RecordingBackend>(std::move(wrapped), path, force, std::move(header));
}

// ---------------------------------------------------------------------------
// Remote chat

namespace {

std::string mime_for(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  return "image/png";
}

std::string provider_role(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::facilitator: return "user";
    case Role::evaluator: return "assistant";
  }
  return "user";
}

std::string extract_content(const std::string& body) {
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded()) throw Error(Errc::Transport, "response body is not JSON");
  try {
    const auto& content = doc.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    std::string joined;
    for (const auto& part : content) {
      if (part.value("type", "") == "text") joined += part.value("text", "");
    }
    return joined;
  } catch (const json::exception& e) {
    throw Error(Errc::Transport, std::string("unexpected response shape: ") + e.what());
  }
}

}  // namespace

RemoteChatBackend::RemoteChatBackend(BackendConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.kind != BackendKind::remote_chat) throw Error(Errc::InvalidConfig, "not a remote_chat config");
  if (config_.api_key_env) {
    if (const char* key = std::getenv(config_.api_key_env->c_str())) api_key_ = key;
  }
  const auto& url = *config_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(Errc::InvalidConfig, "endpoint must be an absolute URL");
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

json RemoteChatBackend::build_request(std::span<const ChatTurn> history) const {
  json messages = json::array();
  for (const auto& turn : history) {
    json msg{{"role", provider_role(turn.role)}};
    if (turn.images.empty()) {
      msg["content"] = turn.text;
    } else {
      json parts = json::array();
      if (!turn.text.empty()) parts.push_back({{"type", "text"}, {"text", turn.text}});
      for (const auto& img : turn.images) {
        const auto url = "data:" + mime_for(img.path) + ";base64," + io::base64_encode(io::read_file(img.path));
        parts.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
      }
      msg["content"] = std::move(parts);
    }
    messages.push_back(std::move(msg));
  }
  json body{{"model", config_.model_label}, {"messages", std::move(messages)}};
  if (config_.temperature) body["temperature"] = *config_.temperature;
  return body;
}

void RemoteChatBackend::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_flight_ < config_.max_concurrent; });
  ++in_flight_;
}

void RemoteChatBackend::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

std::string RemoteChatBackend::complete(std::span<const ChatTurn> history, const RequestContext&) {
  check_history(history);
  const auto body = build_request(history).dump();

  acquire();
  struct Slot {
    RemoteChatBackend* self;
    ~Slot() { self->release(); }
  } slot{this};

  httplib::Client client(scheme_host_port_);
  const auto timeout = std::chrono::duration<double>(config_.timeout_s);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto backoff = config_.initial_backoff;
  std::string last_error;
  bool rate_limited = false;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      rate_limited = false;
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return extract_content(res->body);
    if (res->status == 429) {
      rate_limited = true;
      last_error = "HTTP 429";
      continue;
    }
    if (res->status >= 500) {
      rate_limited = false;
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    throw Error(Errc::Transport, "HTTP " + std::to_string(res->status) + " from " + scheme_host_port_ + path_);
  }
  throw Error(rate_limited ? Errc::RateLimited : Errc::Transport,
              last_error + " after " + std::to_string(config_.max_retries + 1) + " attempts");
}

std::shared_ptr<Backend> make_backend(const BackendConfig& config) {
  config.validate();
  switch (config.kind) {
    case BackendKind::scripted: {
      auto label = config.model_label.empty() ? std::string("scripted") : config.model_label;
      return ScriptedBackend::from_file(*config.script_path, label);
    }
    case BackendKind::replay:
      return std::make_shared<ReplayBackend>(*config.recording_path,
                                             config.model_label == "replay" ? "" : config.model_label);
    case BackendKind::remote_chat:
      return std::make_shared<RemoteChatBackend>(config);
  }
  throw Error(Errc::InvalidConfig, "unknown backend kind");
}

}  // namespace cwalk
