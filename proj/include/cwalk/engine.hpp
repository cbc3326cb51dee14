// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "cwalk/app_graph.hpp"
#include "cwalk/backend.hpp"
#include "cwalk/protocol.hpp"

namespace cwalk {

struct SessionConfig {
  int max_steps = 60;
  int stuck_limit = 5;
  bool with_confusion = false;
  double match_threshold = 0.5;
  int loop_window = 6;
  /// Rationales shorter than this trigger a "why and how" probe.
  std::size_t probe_min_rationale = 15;
  bool probe = true;
  /// LLM sessions finish as soon as a transition lands on a goal screen.
  /// Human sessions finish only through an explicit completion request.
  bool complete_on_goal_arrival = true;
  /// 0 forwards the full chat history each turn; N keeps the prompt, the
  /// task intro and the last N turns.
  std::size_t history_limit = 0;

  /// Throws InvalidConfig.
  void validate() const;

  nlohmann::json to_json() const;
  static SessionConfig from_json(const nlohmann::json& j);

  bool operator==(const SessionConfig&) const = default;
};

enum class AgentKind { llm, scripted, human };
enum class Outcome { completed, aborted_stuck, aborted_max_steps, aborted_error };

std::string_view to_string(AgentKind k) noexcept;
std::string_view to_string(Outcome o) noexcept;
std::optional<AgentKind> parse_agent_kind(std::string_view s) noexcept;
std::optional<Outcome> parse_outcome(std::string_view s) noexcept;

/// One turn of a human participant. Exactly one of action_text /
/// transition_id is set; transition_id is the action label of one of the
/// current screen's transitions (the UI's clickable chips).
struct HumanStepInput {
  std::optional<std::string> action_text;
  std::optional<std::string> transition_id;
  std::string think_aloud;
  std::optional<ConfusionRating> confusion;

  /// Throws SchemaViolation when the invariants above do not hold.
  void check(bool with_confusion) const;

  bool operator==(const HumanStepInput&) const = default;
};

/// Keys action_text, transition_id, think_aloud, confusion (nullable).
nlohmann::json to_json(const HumanStepInput& h);
/// Throws SchemaViolation for bad enum values; json type errors propagate.
HumanStepInput human_step_from_json(const nlohmann::json& j);

using StepResponse = std::variant<EvaluatorResponse, HumanStepInput>;

struct TraceStep {
  int index = 0;
  ScreenId screen;
  /// Absent only when the evaluator reply could not be parsed even after
  /// the repair request; raw_reply and parse_error are set instead.
  std::optional<StepResponse> response;
  std::optional<std::string> raw_reply;
  std::optional<std::string> parse_error;
  std::optional<Transition> resolved;
  bool failsafe = false;
  bool loop_detected = false;
  std::vector<FacilitatorMessage> facilitator_messages;

  bool operator==(const TraceStep&) const = default;
};

/// The free-text action a step asked for ("" for unparseable replies).
std::string step_action_text(const TraceStep& step);
std::optional<ConfusionRating> step_confusion(const TraceStep& step);
std::string step_confusion_rationale(const TraceStep& step);

struct SessionTrace {
  std::string session_id;
  AgentKind agent_kind = AgentKind::llm;
  std::string backend_label;
  std::string run_id;
  /// Grouping label for repeated runs, e.g. "gpt-4o-run2" or a participant.
  std::string run_label;
  std::string app_name;
  /// Snapshot of the task, so traces are self-contained for metrics.
  Task task;
  bool with_confusion = false;
  SessionConfig config;
  FacilitatorMessage intro{FacilitatorMessageKind::task_intro, ""};
  std::vector<TraceStep> steps;
  std::optional<Outcome> outcome;
  std::optional<std::string> error;
  std::string started_at;
  std::string ended_at;

  const std::string& task_id() const { return task.id; }
  int failsafe_count() const;
  bool operator==(const SessionTrace&) const = default;
};

struct SessionOutcomeSummary {
  std::string task_id;
  bool completed = false;
  int resolved_step_count = 0;
  std::vector<ScreenId> path;
};

/// Header line, one line per step, then an outcome line.
std::string to_jsonl(const SessionTrace& trace);
/// Throws SchemaViolation naming `source` and the offending line.
SessionTrace trace_from_jsonl(std::string_view text, const std::string& source = "trace");

/// Jaccard similarity of the normalized token sets.
double token_jaccard(std::string_view a, std::string_view b);

/// Exact match on a normalized label or synonym first, then the best token
/// Jaccard score at or above `threshold` (earlier transitions win ties).
std::optional<Transition> resolve_action(std::string_view action_text, std::span<const Transition> candidates,
                                         double threshold);

/// True when the visited screen sequence ends in a cycle of length 2 or 3
/// repeated twice, or the last two steps repeat the same action on the same
/// screen. Consecutive steps on one screen collapse to a single visit; the
/// destination of the last step's resolved transition counts as visited.
bool detect_loop(std::span<const TraceStep> recent_steps);

/// Throws TaskMismatch when the trace belongs to another task.
SessionOutcomeSummary summarize(const SessionTrace& trace, const Task& task);

using Clock = std::function<std::string()>;

/// UTC wall clock, ISO-8601 with a trailing Z.
std::string utc_now();
/// A clock that always returns `timestamp`, for reproducible runs.
Clock fixed_clock(std::string timestamp);

struct SessionIdentity {
  std::string session_id;
  AgentKind agent_kind = AgentKind::llm;
  std::string backend_label;
  std::string run_id;
  std::string run_label;
};

/// The facilitator state machine for one session. Both the LLM loop
/// (run_session) and the human session service drive it, so fail-safes,
/// loop handling and step counting are identical across arms.
class Walkthrough {
 public:
  Walkthrough(const AppGraph& graph, const Task& task, SessionConfig config, SessionIdentity identity,
              Clock clock = utc_now);

  struct TurnResult {
    bool advanced = false;
    std::vector<FacilitatorMessage> messages;
    bool closed = false;
  };

  const ScreenId& current_screen() const { return current_; }
  bool closed() const { return trace_.outcome.has_value(); }
  int stuck_events() const { return stuck_; }
  const SessionTrace& trace() const { return trace_; }
  const Task& task() const { return task_; }
  const SessionConfig& config() const { return config_; }

  /// Applies one evaluator turn. Throws SessionClosed after termination and
  /// SchemaViolation for invalid human input.
  TurnResult submit(StepResponse response);
  /// As above; `preceding` are messages already sent during this turn (a
  /// parse-repair request) and are recorded on the step.
  TurnResult submit(StepResponse response, std::vector<FacilitatorMessage> preceding);

  /// Records a turn whose reply stayed unparseable after the repair request.
  /// `repair` lists the messages already sent for it. Counts as a stuck event.
  TurnResult submit_unparseable(std::string raw_reply, std::string error,
                                std::vector<FacilitatorMessage> repair);

  /// Explicit completion request. Closes as completed and returns true only
  /// when the current screen is a goal.
  bool complete_if_on_goal();

  void abort_error(std::string message);

 private:
  TurnResult record(TraceStep step, bool stuck_event);
  void close(Outcome outcome);

  const AppGraph& graph_;
  Task task_;
  SessionConfig config_;
  Clock clock_;
  SessionTrace trace_;
  ScreenId current_;
  int stuck_ = 0;
};

/// Drives `evaluator` through one task. Transport failures end the session
/// with outcome aborted_error rather than throwing. Throws
/// GraphTaskMismatch when `task` is not part of `graph`.
SessionTrace run_session(const AppGraph& graph, const Task& task, Backend& evaluator, const SessionConfig& config,
                         const PromptLibrary& prompts, SessionIdentity identity, Clock clock = utc_now);

}  // namespace cwalk
