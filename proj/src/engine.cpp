// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#include "cwalk/engine.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>

#include "cwalk/error.hpp"
#include "cwalk/text.hpp"

namespace cwalk {

using nlohmann::json;

namespace {

constexpr std::string_view kNextScreenText = "Here is the next screen. Continue the walkthrough.";

}  // namespace

// ---------------------------------------------------------------------------
// Enums and config

std::string_view to_string(AgentKind k) noexcept {
  switch (k) {
    case AgentKind::llm: return "llm";
    case AgentKind::scripted: return "scripted";
    case AgentKind::human: return "human";
  }
  return "llm";
}

std::string_view to_string(Outcome o) noexcept {
  switch (o) {
    case Outcome::completed: return "completed";
    case Outcome::aborted_stuck: return "aborted_stuck";
    case Outcome::aborted_max_steps: return "aborted_max_steps";
    case Outcome::aborted_error: return "aborted_error";
  }
  return "aborted_error";
}

std::optional<AgentKind> parse_agent_kind(std::string_view s) noexcept {
  if (s == "llm") return AgentKind::llm;
  if (s == "scripted") return AgentKind::scripted;
  if (s == "human") return AgentKind::human;
  return std::nullopt;
}

std::optional<Outcome> parse_outcome(std::string_view s) noexcept {
  if (s == "completed") return Outcome::completed;
  if (s == "aborted_stuck") return Outcome::aborted_stuck;
  if (s == "aborted_max_steps") return Outcome::aborted_max_steps;
  if (s == "aborted_error") return Outcome::aborted_error;
  return std::nullopt;
}

void SessionConfig::validate() const {
  if (max_steps < 1) throw Error(Errc::InvalidConfig, "max_steps must be >= 1");
  if (stuck_limit < 1) throw Error(Errc::InvalidConfig, "stuck_limit must be >= 1");
  if (loop_window < 4) throw Error(Errc::InvalidConfig, "loop_window must be >= 4");
  if (!(match_threshold >= 0.0 && match_threshold <= 1.0)) {
    throw Error(Errc::InvalidConfig, "match_threshold must be in [0, 1]");
  }
}

json SessionConfig::to_json() const {
  return {{"max_steps", max_steps},
          {"stuck_limit", stuck_limit},
          {"with_confusion", with_confusion},
          {"match_threshold", match_threshold},
          {"loop_window", loop_window},
          {"probe_min_rationale", probe_min_rationale},
          {"probe", probe},
          {"complete_on_goal_arrival", complete_on_goal_arrival},
          {"history_limit", history_limit}};
}

SessionConfig SessionConfig::from_json(const json& j) {
  SessionConfig c;
  c.max_steps = j.value("max_steps", c.max_steps);
  c.stuck_limit = j.value("stuck_limit", c.stuck_limit);
  c.with_confusion = j.value("with_confusion", c.with_confusion);
  c.match_threshold = j.value("match_threshold", c.match_threshold);
  c.loop_window = j.value("loop_window", c.loop_window);
  c.probe_min_rationale = j.value("probe_min_rationale", c.probe_min_rationale);
  c.probe = j.value("probe", c.probe);
  c.complete_on_goal_arrival = j.value("complete_on_goal_arrival", c.complete_on_goal_arrival);
  c.history_limit = j.value("history_limit", c.history_limit);
  c.validate();
  return c;
}

void HumanStepInput::check(bool with_confusion) const {
  if (action_text.has_value() == transition_id.has_value()) {
    throw Error(Errc::SchemaViolation, "exactly one of action_text / transition_id is required");
  }
  if (action_text && text::trim(*action_text).empty()) throw Error(Errc::SchemaViolation, "action_text is empty");
  if (with_confusion && !confusion) throw Error(Errc::SchemaViolation, "a confusion rating is required");
}

// ---------------------------------------------------------------------------
// Step accessors

std::string step_action_text(const TraceStep& step) {
  if (!step.response) return {};
  if (const auto* r = std::get_if<EvaluatorResponse>(&*step.response)) return r->next_action;
  const auto& h = std::get<HumanStepInput>(*step.response);
  return h.action_text ? *h.action_text : h.transition_id.value_or("");
}

std::optional<ConfusionRating> step_confusion(const TraceStep& step) {
  if (!step.response) return std::nullopt;
  if (const auto* r = std::get_if<EvaluatorResponse>(&*step.response)) return r->confusion;
  return std::get<HumanStepInput>(*step.response).confusion;
}

std::string step_confusion_rationale(const TraceStep& step) {
  if (!step.response) return {};
  if (const auto* r = std::get_if<EvaluatorResponse>(&*step.response)) return r->confusion_rationale.value_or("");
  return std::get<HumanStepInput>(*step.response).think_aloud;
}

int SessionTrace::failsafe_count() const {
  return static_cast<int>(std::count_if(steps.begin(), steps.end(), [](const TraceStep& s) { return s.failsafe; }));
}

// ---------------------------------------------------------------------------
// Trace serialization

json to_json(const HumanStepInput& h) {
  json j{{"think_aloud", h.think_aloud}};
  j["action_text"] = h.action_text ? json(*h.action_text) : json(nullptr);
  j["transition_id"] = h.transition_id ? json(*h.transition_id) : json(nullptr);
  j["confusion"] = h.confusion ? json(to_string(*h.confusion)) : json(nullptr);
  return j;
}

HumanStepInput human_step_from_json(const json& j) {
  HumanStepInput h;
  if (j.contains("action_text") && !j["action_text"].is_null()) h.action_text = j["action_text"].get<std::string>();
  if (j.contains("transition_id") && !j["transition_id"].is_null()) {
    h.transition_id = j["transition_id"].get<std::string>();
  }
  h.think_aloud = j.value("think_aloud", std::string());
  if (j.contains("confusion") && !j["confusion"].is_null()) {
    auto c = parse_confusion(j["confusion"].get<std::string>());
    if (!c) throw Error(Errc::SchemaViolation, "bad confusion rating");
    h.confusion = *c;
  }
  return h;
}

namespace {

json task_json(const Task& t) {
  return {{"id", t.id},
          {"description", t.description},
          {"start", t.start_screen},
          {"goals", t.goal_screens},
          {"correct_paths", t.correct_paths}};
}

Task task_from(const json& j) {
  Task t;
  t.id = j.at("id").get<std::string>();
  t.description = j.at("description").get<std::string>();
  t.start_screen = j.at("start").get<std::string>();
  t.goal_screens = j.at("goals").get<std::vector<std::string>>();
  t.correct_paths = j.at("correct_paths").get<std::vector<std::vector<std::string>>>();
  return t;
}

json transition_json(const Transition& t) {
  return {{"from", t.from}, {"action", t.action_label}, {"synonyms", t.synonyms}, {"kind", to_string(t.kind)},
          {"to", t.to}};
}

Transition transition_from(const json& j) {
  Transition t;
  t.from = j.at("from").get<std::string>();
  t.action_label = j.at("action").get<std::string>();
  t.synonyms = j.value("synonyms", std::vector<std::string>{});
  auto kind = parse_transition_kind(j.at("kind").get<std::string>());
  if (!kind) throw Error(Errc::SchemaViolation, "bad transition kind");
  t.kind = *kind;
  t.to = j.at("to").get<std::string>();
  return t;
}

json message_json(const FacilitatorMessage& m) { return {{"kind", to_string(m.kind)}, {"text", m.text}}; }

FacilitatorMessage message_from(const json& j) {
  auto kind = parse_facilitator_message_kind(j.at("kind").get<std::string>());
  if (!kind) throw Error(Errc::SchemaViolation, "bad facilitator message kind");
  return {*kind, j.at("text").get<std::string>()};
}

json step_json(const TraceStep& s) {
  json j{{"record", "step"}, {"index", s.index}, {"screen", s.screen}};
  if (!s.response) {
    j["response_kind"] = nullptr;
    j["response"] = nullptr;
  } else if (const auto* r = std::get_if<EvaluatorResponse>(&*s.response)) {
    j["response_kind"] = "evaluator";
    j["response"] = to_json(*r);
  } else {
    j["response_kind"] = "human";
    j["response"] = to_json(std::get<HumanStepInput>(*s.response));
  }
  if (s.raw_reply) j["raw_reply"] = *s.raw_reply;
  if (s.parse_error) j["parse_error"] = *s.parse_error;
  j["resolved"] = s.resolved ? transition_json(*s.resolved) : json(nullptr);
  j["failsafe"] = s.failsafe;
  j["loop_detected"] = s.loop_detected;
  j["facilitator_messages"] = json::array();
  for (const auto& m : s.facilitator_messages) j["facilitator_messages"].push_back(message_json(m));
  return j;
}

TraceStep step_from(const json& j, bool with_confusion) {
  TraceStep s;
  s.index = j.at("index").get<int>();
  s.screen = j.at("screen").get<std::string>();
  const auto& kind = j.at("response_kind");
  if (kind.is_string()) {
    const auto k = kind.get<std::string>();
    if (k == "evaluator") {
      s.response = parse_evaluator_response(j.at("response").dump(),
                                            with_confusion ? ResponseMode::with_confusion : ResponseMode::plain);
    } else if (k == "human") {
      s.response = human_step_from_json(j.at("response"));
    } else {
      throw Error(Errc::SchemaViolation, "bad response_kind '" + k + "'");
    }
  }
  if (j.contains("raw_reply")) s.raw_reply = j["raw_reply"].get<std::string>();
  if (j.contains("parse_error")) s.parse_error = j["parse_error"].get<std::string>();
  if (!j.at("resolved").is_null()) s.resolved = transition_from(j["resolved"]);
  s.failsafe = j.at("failsafe").get<bool>();
  s.loop_detected = j.value("loop_detected", false);
  for (const auto& m : j.at("facilitator_messages")) s.facilitator_messages.push_back(message_from(m));
  return s;
}

}  // namespace

std::string to_jsonl(const SessionTrace& t) {
  json header{{"record", "header"},
              {"schema", "cwalk-trace/1"},
              {"session_id", t.session_id},
              {"agent_kind", to_string(t.agent_kind)},
              {"backend_label", t.backend_label},
              {"run_id", t.run_id},
              {"run_label", t.run_label},
              {"app_name", t.app_name},
              {"task", task_json(t.task)},
              {"with_confusion", t.with_confusion},
              {"config", t.config.to_json()},
              {"intro", message_json(t.intro)},
              {"started_at", t.started_at}};
  std::string out = header.dump() + '\n';
  for (const auto& s : t.steps) out += step_json(s).dump() + '\n';
  if (t.outcome) {
    json end{{"record", "outcome"},
             {"outcome", to_string(*t.outcome)},
             {"ended_at", t.ended_at},
             {"failsafe_count", t.failsafe_count()}};
    end["error"] = t.error ? json(*t.error) : json(nullptr);
    out += end.dump() + '\n';
  }
  return out;
}

SessionTrace trace_from_jsonl(std::string_view text, const std::string& source) {
  SessionTrace t;
  std::size_t lineno = 0;
  bool have_header = false;
  bool have_outcome = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    if (text::trim(line).empty()) continue;
    auto fail = [&](const std::string& what) -> Error {
      return Error(Errc::SchemaViolation, source + ":" + std::to_string(lineno) + ": " + what);
    };
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw fail("not a JSON record");
    try {
      const auto record = j.at("record").get<std::string>();
      if (have_outcome) throw fail("record after outcome");
      if (record == "header") {
        if (have_header) throw fail("duplicate header");
        if (j.at("schema").get<std::string>() != "cwalk-trace/1") throw fail("unsupported schema");
        t.session_id = j.at("session_id").get<std::string>();
        auto kind = parse_agent_kind(j.at("agent_kind").get<std::string>());
        if (!kind) throw fail("bad agent_kind");
        t.agent_kind = *kind;
        t.backend_label = j.at("backend_label").get<std::string>();
        t.run_id = j.value("run_id", std::string());
        t.run_label = j.value("run_label", std::string());
        t.app_name = j.at("app_name").get<std::string>();
        t.task = task_from(j.at("task"));
        t.with_confusion = j.at("with_confusion").get<bool>();
        t.config = SessionConfig::from_json(j.value("config", json::object()));
        t.intro = message_from(j.at("intro"));
        t.started_at = j.at("started_at").get<std::string>();
        have_header = true;
      } else if (record == "step") {
        if (!have_header) throw fail("step before header");
        auto step = step_from(j, t.with_confusion);
        if (step.index != static_cast<int>(t.steps.size())) throw fail("step index out of order");
        t.steps.push_back(std::move(step));
      } else if (record == "outcome") {
        if (!have_header) throw fail("outcome before header");
        auto outcome = parse_outcome(j.at("outcome").get<std::string>());
        if (!outcome) throw fail("bad outcome");
        t.outcome = *outcome;
        t.ended_at = j.at("ended_at").get<std::string>();
        if (j.contains("error") && !j["error"].is_null()) t.error = j["error"].get<std::string>();
        have_outcome = true;
      } else {
        throw fail("unknown record type '" + record + "'");
      }
    } catch (const json::exception& e) {
      throw fail(e.what());
    } catch (const Error& e) {
      if (e.code() == Errc::SchemaViolation && std::string_view(e.what()).find(source) != std::string_view::npos) {
        throw;
      }
      throw fail(e.what());
    }
  }
  if (!have_header) throw Error(Errc::SchemaViolation, source + ": missing header record");
  return t;
}

// ---------------------------------------------------------------------------
// Action resolution and loop detection

double token_jaccard(std::string_view a, std::string_view b) {
  const auto sa = text::token_set(a);
  const auto sb = text::token_set(b);
  if (sa.empty() && sb.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& w : sa) inter += sb.count(w);
  const auto uni = sa.size() + sb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::optional<Transition> resolve_action(std::string_view action_text, std::span<const Transition> candidates,
                                         double threshold) {
  const auto wanted = text::normalize(action_text);
  if (wanted.empty()) return std::nullopt;
  for (const auto& t : candidates) {
    if (text::normalize(t.action_label) == wanted) return t;
    for (const auto& syn : t.synonyms) {
      if (text::normalize(syn) == wanted) return t;
    }
  }
  const Transition* best = nullptr;
  double best_score = 0.0;
  for (const auto& t : candidates) {
    double score = token_jaccard(wanted, t.action_label);
    for (const auto& syn : t.synonyms) score = std::max(score, token_jaccard(wanted, syn));
    if (score > best_score) {
      best_score = score;
      best = &t;
    }
  }
  if (best && best_score >= threshold) return *best;
  return std::nullopt;
}

bool detect_loop(std::span<const TraceStep> recent_steps) {
  if (recent_steps.size() >= 2) {
    const auto& prev = recent_steps[recent_steps.size() - 2];
    const auto& last = recent_steps.back();
    if (prev.screen == last.screen && prev.response && last.response) {
      const auto a = text::normalize(step_action_text(prev));
      if (!a.empty() && a == text::normalize(step_action_text(last))) return true;
    }
  }

  std::vector<ScreenId> visits;
  auto visit = [&](const ScreenId& s) {
    if (visits.empty() || visits.back() != s) visits.push_back(s);
  };
  for (const auto& s : recent_steps) visit(s.screen);
  if (!recent_steps.empty() && recent_steps.back().resolved) visit(recent_steps.back().resolved->to);

  for (std::size_t len = 2; len <= 3; ++len) {
    if (visits.size() < 2 * len) continue;
    const auto tail = visits.end() - static_cast<std::ptrdiff_t>(len);
    if (std::equal(tail, visits.end(), tail - static_cast<std::ptrdiff_t>(len))) return true;
  }
  return false;
}

SessionOutcomeSummary summarize(const SessionTrace& trace, const Task& task) {
  if (trace.task_id() != task.id) {
    throw Error(Errc::TaskMismatch, "trace is for task '" + trace.task_id() + "', not '" + task.id + "'");
  }
  SessionOutcomeSummary s;
  s.task_id = task.id;
  s.completed = trace.outcome == Outcome::completed;
  s.path.push_back(task.start_screen);
  for (const auto& step : trace.steps) {
    if (!step.resolved) continue;
    ++s.resolved_step_count;
    s.path.push_back(step.resolved->to);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Clock

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Clock fixed_clock(std::string timestamp) {
  return [ts = std::move(timestamp)] { return ts; };
}

// ---------------------------------------------------------------------------
// Walkthrough

Walkthrough::Walkthrough(const AppGraph& graph, const Task& task, SessionConfig config, SessionIdentity identity,
                         Clock clock)
    : graph_(graph), task_(task), config_(std::move(config)), clock_(std::move(clock)) {
  config_.validate();
  if (!graph_.find_screen(task_.start_screen)) {
    throw Error(Errc::GraphTaskMismatch, "start screen '" + task_.start_screen + "' is not in the graph");
  }
  trace_.session_id = std::move(identity.session_id);
  trace_.agent_kind = identity.agent_kind;
  trace_.backend_label = std::move(identity.backend_label);
  trace_.run_id = std::move(identity.run_id);
  trace_.run_label = std::move(identity.run_label);
  trace_.app_name = graph_.name;
  trace_.task = task_;
  trace_.with_confusion = config_.with_confusion;
  trace_.config = config_;
  trace_.intro = task_intro_message(task_.description);
  trace_.started_at = clock_();
  current_ = task_.start_screen;
}

Walkthrough::TurnResult Walkthrough::submit(StepResponse response) {
  return submit(std::move(response), {});
}

Walkthrough::TurnResult Walkthrough::submit(StepResponse response, std::vector<FacilitatorMessage> preceding) {
  if (closed()) throw Error(Errc::SessionClosed, "session " + trace_.session_id + " is closed");

  TraceStep step;
  step.index = static_cast<int>(trace_.steps.size());
  step.screen = current_;
  step.facilitator_messages = std::move(preceding);

  std::string rationale;
  const HumanStepInput* human = std::get_if<HumanStepInput>(&response);
  if (human) {
    human->check(config_.with_confusion);
    rationale = human->think_aloud;
  } else {
    auto& r = std::get<EvaluatorResponse>(response);
    if (config_.with_confusion && !r.confusion) {
      throw Error(Errc::ModeMismatch, "evaluator turn lacks a confusion rating");
    }
    if (!config_.with_confusion) {
      r.confusion.reset();
      r.confusion_rationale.reset();
    }
    rationale = r.next_action_rationale;
    if (r.declares_complete && task_.is_goal(current_)) {
      step.response = std::move(response);
      step.facilitator_messages.push_back(completion_query_message());
      trace_.steps.push_back(std::move(step));
      close(Outcome::completed);
      return {false, {completion_query_message()}, true};
    }
  }

  const auto candidates = available_transitions(graph_, current_);
  std::optional<Transition> match;
  if (human && human->transition_id) {
    auto it = std::find_if(candidates.begin(), candidates.end(),
                           [&](const Transition& t) { return t.action_label == *human->transition_id; });
    if (it == candidates.end()) {
      throw Error(Errc::SchemaViolation, "transition '" + *human->transition_id + "' is not available on " + current_);
    }
    match = *it;
  } else {
    const auto action = human ? *human->action_text : std::get<EvaluatorResponse>(response).next_action;
    match = resolve_action(action, candidates, config_.match_threshold);
  }
  step.response = std::move(response);

  if (match) {
    step.resolved = std::move(match);
    const auto keep = static_cast<std::size_t>(config_.loop_window - 1);
    const auto first = trace_.steps.size() > keep ? trace_.steps.end() - static_cast<std::ptrdiff_t>(keep)
                                                  : trace_.steps.begin();
    std::vector<TraceStep> window(first, trace_.steps.end());
    window.push_back(step);
    if (detect_loop(window)) {
      step.loop_detected = true;
      step.resolved.reset();
    }
  }

  const bool stuck = !step.resolved;
  if (stuck) {
    step.failsafe = true;
    step.facilitator_messages.push_back(failsafe_message());
  }
  if (config_.probe && text::trim(rationale).size() < config_.probe_min_rationale) {
    step.facilitator_messages.push_back(probe_message());
  }
  return record(std::move(step), stuck);
}

Walkthrough::TurnResult Walkthrough::submit_unparseable(std::string raw_reply, std::string error,
                                                        std::vector<FacilitatorMessage> repair) {
  if (closed()) throw Error(Errc::SessionClosed, "session " + trace_.session_id + " is closed");
  TraceStep step;
  step.index = static_cast<int>(trace_.steps.size());
  step.screen = current_;
  step.raw_reply = std::move(raw_reply);
  step.parse_error = std::move(error);
  step.facilitator_messages = std::move(repair);
  step.failsafe = true;
  step.facilitator_messages.push_back(failsafe_message());
  return record(std::move(step), true);
}

Walkthrough::TurnResult Walkthrough::record(TraceStep step, bool stuck_event) {
  TurnResult result;
  result.advanced = step.resolved.has_value();
  for (const auto& m : step.facilitator_messages) {
    if (m.kind != FacilitatorMessageKind::parse_repair) result.messages.push_back(m);
  }
  if (result.advanced) current_ = step.resolved->to;
  if (stuck_event) ++stuck_;
  trace_.steps.push_back(std::move(step));

  if (stuck_ >= config_.stuck_limit) {
    close(Outcome::aborted_stuck);
  } else if (result.advanced && config_.complete_on_goal_arrival && task_.is_goal(current_)) {
    close(Outcome::completed);
  } else if (static_cast<int>(trace_.steps.size()) >= config_.max_steps) {
    close(Outcome::aborted_max_steps);
  }
  result.closed = closed();
  return result;
}

bool Walkthrough::complete_if_on_goal() {
  if (closed()) throw Error(Errc::SessionClosed, "session " + trace_.session_id + " is closed");
  if (!task_.is_goal(current_)) return false;
  close(Outcome::completed);
  return true;
}

void Walkthrough::abort_error(std::string message) {
  if (closed()) return;
  trace_.error = std::move(message);
  close(Outcome::aborted_error);
}

void Walkthrough::close(Outcome outcome) {
  trace_.outcome = outcome;
  trace_.ended_at = clock_();
}

// ---------------------------------------------------------------------------
// LLM session loop

namespace {

std::vector<ChatTurn> windowed(const std::vector<ChatTurn>& history, std::size_t limit) {
  constexpr std::size_t kFixed = 2;  // prompt + task intro
  if (limit == 0 || history.size() <= kFixed + limit) return history;
  std::vector<ChatTurn> out(history.begin(), history.begin() + kFixed);
  out.insert(out.end(), history.end() - static_cast<std::ptrdiff_t>(limit), history.end());
  return out;
}

std::string joined_text(const std::vector<FacilitatorMessage>& messages) {
  std::string out;
  for (const auto& m : messages) {
    if (!out.empty()) out += "\n";
    out += m.text;
  }
  return out;
}

}  // namespace

SessionTrace run_session(const AppGraph& graph, const Task& task, Backend& evaluator, const SessionConfig& config,
                         const PromptLibrary& prompts, SessionIdentity identity, Clock clock) {
  const Task* owned = graph.find_task(task.id);
  if (!owned || !(*owned == task)) {
    throw Error(Errc::GraphTaskMismatch, "task '" + task.id + "' does not belong to app '" + graph.name + "'");
  }
  const auto mode = config.with_confusion ? ResponseMode::with_confusion : ResponseMode::plain;
  const auto tmpl = config.with_confusion ? TemplateId::evaluator_with_confusion : TemplateId::evaluator_plain;

  RequestContext ctx{identity.session_id, task.id, std::nullopt};
  Walkthrough walk(graph, task, config, std::move(identity), std::move(clock));

  auto screen_image = [&](const ScreenId& id) {
    return ImageRef{id, graph.image_path(*graph.find_screen(id))};
  };

  std::vector<ChatTurn> history;
  history.push_back({Role::system, prompts.render(tmpl, task.description), {}});
  history.push_back({Role::facilitator, walk.trace().intro.text, {screen_image(task.start_screen)}});

  auto ask = [&]() -> std::optional<std::string> {
    try {
      ctx.screen_id = walk.current_screen();
      const auto view = windowed(history, config.history_limit);
      return evaluator.complete(view, ctx);
    } catch (const std::exception& e) {
      walk.abort_error(std::string(errc_name(Errc::BackendUnavailable)) + ": " + e.what());
      return std::nullopt;
    }
  };
  auto as_turn = [](const std::string& raw) {
    return ChatTurn{Role::evaluator, raw.empty() ? std::string("(empty reply)") : raw, {}};
  };

  while (!walk.closed()) {
    auto raw = ask();
    if (!raw) break;

    std::optional<EvaluatorResponse> parsed;
    std::string error;
    try {
      parsed = parse_evaluator_response(*raw, mode);
    } catch (const Error& e) {
      error = e.what();
    }

    std::vector<FacilitatorMessage> repair;
    if (!parsed) {
      repair.push_back(parse_repair_message());
      history.push_back(as_turn(*raw));
      history.push_back({Role::facilitator, repair.back().text, {}});
      raw = ask();
      if (!raw) break;
      try {
        parsed = parse_evaluator_response(*raw, mode);
      } catch (const Error& e) {
        error = e.what();
      }
    }
    history.push_back(as_turn(*raw));

    const auto result = parsed ? walk.submit(std::move(*parsed), std::move(repair))
                               : walk.submit_unparseable(*raw, error, std::move(repair));
    if (result.closed) break;
    const auto text = result.messages.empty() ? std::string(kNextScreenText) : joined_text(result.messages);
    history.push_back({Role::facilitator, text, {screen_image(walk.current_screen())}});
  }
  return walk.trace();
}

}  // namespace cwalk
