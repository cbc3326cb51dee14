// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#include "cwalk/protocol.hpp"

#include <array>
#include <cstdlib>
#include <regex>

#include "cwalk/error.hpp"
#include "cwalk/io.hpp"
#include "cwalk/text.hpp"

#ifndef CWALK_PROMPT_DIR
#define CWALK_PROMPT_DIR "prompts"
#endif

namespace cwalk {

using nlohmann::json;

std::string_view to_string(Confidence c) noexcept {
  switch (c) {
    case Confidence::low: return "low";
    case Confidence::medium: return "medium";
    case Confidence::high: return "high";
  }
  return "medium";
}

std::string_view to_string(ConfusionRating r) noexcept {
  switch (r) {
    case ConfusionRating::not_at_all: return "not_at_all";
    case ConfusionRating::slightly: return "slightly";
    case ConfusionRating::very: return "very";
  }
  return "not_at_all";
}

std::string_view to_string(BinaryRating b) noexcept {
  return b == BinaryRating::confusing ? "confusing" : "not_confusing";
}

std::optional<Confidence> parse_confidence(std::string_view s) {
  const auto n = text::normalize(s);
  if (n == "low") return Confidence::low;
  if (n == "medium") return Confidence::medium;
  if (n == "high") return Confidence::high;
  return std::nullopt;
}

std::optional<ConfusionRating> parse_confusion(std::string_view s) {
  const auto n = text::normalize(s);
  auto starts = [&](std::string_view prefix) {
    return n.size() >= prefix.size() && n.compare(0, prefix.size(), prefix) == 0 &&
           (n.size() == prefix.size() || n[prefix.size()] == ' ');
  };
  if (starts("not at all") || n == "not confusing" || n == "no") return ConfusionRating::not_at_all;
  if (starts("slightly")) return ConfusionRating::slightly;
  if (starts("very")) return ConfusionRating::very;
  return std::nullopt;
}

std::optional<BinaryRating> parse_binary(std::string_view s) {
  if (s == "confusing") return BinaryRating::confusing;
  if (s == "not_confusing") return BinaryRating::not_confusing;
  return std::nullopt;
}

BinaryRating collapse_rating(ConfusionRating r) noexcept {
  return r == ConfusionRating::not_at_all ? BinaryRating::not_confusing : BinaryRating::confusing;
}

std::string_view to_string(FacilitatorMessageKind k) noexcept {
  switch (k) {
    case FacilitatorMessageKind::task_intro: return "task_intro";
    case FacilitatorMessageKind::probe: return "probe";
    case FacilitatorMessageKind::failsafe: return "failsafe";
    case FacilitatorMessageKind::completion_query: return "completion_query";
    case FacilitatorMessageKind::parse_repair: return "parse_repair";
  }
  return "probe";
}

std::optional<FacilitatorMessageKind> parse_facilitator_message_kind(std::string_view s) noexcept {
  if (s == "task_intro") return FacilitatorMessageKind::task_intro;
  if (s == "probe") return FacilitatorMessageKind::probe;
  if (s == "failsafe") return FacilitatorMessageKind::failsafe;
  if (s == "completion_query") return FacilitatorMessageKind::completion_query;
  if (s == "parse_repair") return FacilitatorMessageKind::parse_repair;
  return std::nullopt;
}

FacilitatorMessage failsafe_message() { return {FacilitatorMessageKind::failsafe, std::string(kFailsafeMessage)}; }
FacilitatorMessage parse_repair_message() {
  return {FacilitatorMessageKind::parse_repair, std::string(kParseRepairMessage)};
}
FacilitatorMessage probe_message() { return {FacilitatorMessageKind::probe, std::string(kProbeMessage)}; }
FacilitatorMessage completion_query_message() {
  return {FacilitatorMessageKind::completion_query, std::string(kCompletionQueryMessage)};
}
FacilitatorMessage task_intro_message(std::string_view task_description) {
  return {FacilitatorMessageKind::task_intro,
          "User task: " + std::string(task_description) +
              "\nHere is the start screen. Which component would you interact with next, and why?"};
}

// ---------------------------------------------------------------------------
// JSON extraction

namespace {

constexpr int kMaxNesting = 64;

// Returns the end (one past the closing brace) of the balanced object that
// starts at `open`, or npos when the text ends first or nests too deep.
std::size_t balanced_end(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{' || c == '[') {
      if (++depth > kMaxNesting) return std::string_view::npos;
    } else if (c == '}' || c == ']') {
      if (--depth == 0) return c == '}' ? i + 1 : std::string_view::npos;
      if (depth < 0) return std::string_view::npos;
    }
  }
  return std::string_view::npos;
}

std::optional<json> try_parse_object(const std::string& candidate) {
  auto parsed = json::parse(candidate, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) {
    static const std::regex kTrailingComma(R"(,(\s*[}\]]))");
    parsed = json::parse(std::regex_replace(candidate, kTrailingComma, "$1"), nullptr, false);
  }
  if (parsed.is_discarded() || !parsed.is_object()) return std::nullopt;
  return parsed;
}

}  // namespace

std::optional<json> extract_json_object(std::string_view raw) {
  for (std::size_t open = raw.find('{'); open != std::string_view::npos; open = raw.find('{', open + 1)) {
    const auto end = balanced_end(raw, open);
    if (end == std::string_view::npos) continue;
    if (auto obj = try_parse_object(std::string(raw.substr(open, end - open)))) return obj;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Evaluator response parsing

namespace {

enum class Field {
  current_state,
  possible_actions,
  next_action,
  next_action_rationale,
  confusion,
  confusion_rationale,
  declares_complete,
  unknown,
};

Field classify_key(const std::string& key) {
  const auto k = text::squash_key(key);
  if (k == "currentstate" || k == "state") return Field::current_state;
  if (k == "possibleactions" || k == "possibleaction" || k == "actions") return Field::possible_actions;
  if (k == "nextaction") return Field::next_action;
  // The appendix prompt itself spells it "next_action_rationle".
  if (k == "nextactionrationale" || k == "nextactionrationle" || k == "nextactionreason") {
    return Field::next_action_rationale;
  }
  if (k == "confusingornot" || k == "confusion" || k == "confusionrating" || k == "confusing") {
    return Field::confusion;
  }
  if (k == "confusingornotrationale" || k == "confusionrationale" || k == "confusingrationale") {
    return Field::confusion_rationale;
  }
  if (k == "taskcomplete" || k == "taskcompleted" || k == "declarescomplete" || k == "completed" ||
      k == "iscomplete" || k == "taskdone") {
    return Field::declares_complete;
  }
  return Field::unknown;
}

[[noreturn]] void schema(const std::string& what) { throw Error(Errc::SchemaViolation, what); }

std::string require_string(const json& v, std::string_view name) {
  if (!v.is_string()) schema("field '" + std::string(name) + "' must be a string");
  return v.get<std::string>();
}

bool is_completion_phrase(std::string_view next_action) {
  static constexpr std::array<std::string_view, 8> kPhrases = {
      "task complete", "task completed", "task is complete", "task is completed",
      "done",          "i am done",      "the task is complete", "the task is completed"};
  const auto n = text::normalize(next_action);
  for (auto p : kPhrases) {
    if (n == p) return true;
  }
  return false;
}

bool parse_flag(const json& v) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    const auto n = text::normalize(v.get<std::string>());
    if (n == "true" || n == "yes") return true;
    if (n == "false" || n == "no") return false;
  }
  schema("task completion flag must be a boolean or yes/no");
}

PossibleAction parse_possible_action(const json& v) {
  if (!v.is_object()) schema("possible_actions entries must be objects");
  PossibleAction pa;
  std::optional<std::string> action, rationale, confidence;
  for (const auto& [key, value] : v.items()) {
    const auto k = text::squash_key(key);
    if (k == "action") action = require_string(value, "action");
    else if (k == "rationale" || k == "reason") rationale = require_string(value, "rationale");
    else if (k == "confidence" || k == "likelihood") confidence = require_string(value, "confidence");
  }
  if (!action || text::trim(*action).empty()) schema("possible action is missing 'action'");
  if (!rationale || text::trim(*rationale).empty()) schema("possible action is missing 'rationale'");
  if (!confidence) schema("possible action is missing 'confidence'");
  auto c = parse_confidence(*confidence);
  if (!c) schema("bad confidence '" + *confidence + "'");
  pa.action = std::move(*action);
  pa.rationale = std::move(*rationale);
  pa.confidence = *c;
  return pa;
}

}  // namespace

EvaluatorResponse parse_evaluator_response(std::string_view raw, ResponseMode mode) {
  auto doc = extract_json_object(raw);
  if (!doc) throw Error(Errc::NoJsonFound, "no JSON object in evaluator reply");

  EvaluatorResponse r;
  std::optional<std::string> current_state, next_action, next_rationale, confusion, confusion_rationale;
  const json* actions = nullptr;
  bool explicit_complete = false;

  for (const auto& [key, value] : doc->items()) {
    switch (classify_key(key)) {
      case Field::current_state: current_state = require_string(value, "current_state"); break;
      case Field::possible_actions: actions = &value; break;
      case Field::next_action: next_action = require_string(value, "next_action"); break;
      case Field::next_action_rationale: next_rationale = require_string(value, "next_action_rationale"); break;
      case Field::confusion: confusion = require_string(value, "confusing_or_not"); break;
      case Field::confusion_rationale:
        confusion_rationale = require_string(value, "confusing_or_not_rationale");
        break;
      case Field::declares_complete: explicit_complete = explicit_complete || parse_flag(value); break;
      case Field::unknown: break;
    }
  }

  if (!current_state) schema("missing field 'current_state'");
  if (!actions) schema("missing field 'possible_actions'");
  if (!next_action) schema("missing field 'next_action'");
  if (!next_rationale) schema("missing field 'next_action_rationale'");
  if (text::trim(*next_action).empty()) schema("field 'next_action' is empty");

  r.current_state = std::move(*current_state);
  if (actions->is_array()) {
    for (const auto& a : *actions) r.possible_actions.push_back(parse_possible_action(a));
  } else {
    r.possible_actions.push_back(parse_possible_action(*actions));
  }
  if (r.possible_actions.empty()) schema("possible_actions is empty");
  r.next_action = std::move(*next_action);
  r.next_action_rationale = std::move(*next_rationale);
  r.declares_complete = explicit_complete || is_completion_phrase(r.next_action);

  if (mode == ResponseMode::with_confusion) {
    if (!confusion) throw Error(Errc::ModeMismatch, "reply lacks 'confusing or not' in with-confusion mode");
    auto level = parse_confusion(*confusion);
    if (!level) schema("bad confusion rating '" + *confusion + "'");
    if (!confusion_rationale) schema("missing field 'confusing_or_not_rationale'");
    r.confusion = *level;
    r.confusion_rationale = std::move(*confusion_rationale);
  }
  return r;
}

json to_json(const EvaluatorResponse& r) {
  json j;
  j["current_state"] = r.current_state;
  j["possible_actions"] = json::array();
  for (const auto& a : r.possible_actions) {
    j["possible_actions"].push_back(
        {{"action", a.action}, {"rationale", a.rationale}, {"confidence", to_string(a.confidence)}});
  }
  j["next_action"] = r.next_action;
  j["next_action_rationale"] = r.next_action_rationale;
  if (r.confusion) j["confusing_or_not"] = to_string(*r.confusion);
  if (r.confusion_rationale) j["confusing_or_not_rationale"] = *r.confusion_rationale;
  j["task_complete"] = r.declares_complete;
  return j;
}

ConfusionAnswer parse_confusion_answer(std::string_view raw) {
  auto doc = extract_json_object(raw);
  if (!doc) throw Error(Errc::NoJsonFound, "no JSON object in rating reply");
  std::optional<std::string> level, rationale;
  for (const auto& [key, value] : doc->items()) {
    const auto f = classify_key(key);
    if (f == Field::confusion) level = require_string(value, "confusing_or_not");
    if (f == Field::confusion_rationale) rationale = require_string(value, "confusing_or_not_rationale");
  }
  if (!level) schema("missing field 'confusing_or_not'");
  if (!rationale) schema("missing field 'confusing_or_not_rationale'");
  auto parsed = parse_confusion(*level);
  if (!parsed) schema("bad confusion rating '" + *level + "'");
  return {*parsed, std::move(*rationale)};
}

// ---------------------------------------------------------------------------
// Prompt templates

std::string_view to_string(TemplateId id) noexcept {
  switch (id) {
    case TemplateId::facilitator: return "facilitator";
    case TemplateId::evaluator_plain: return "evaluator_plain";
    case TemplateId::evaluator_with_confusion: return "evaluator_with_confusion";
    case TemplateId::without_context: return "without_context";
  }
  return "facilitator";
}

std::optional<TemplateId> parse_template_id(std::string_view s) noexcept {
  for (auto id : {TemplateId::facilitator, TemplateId::evaluator_plain, TemplateId::evaluator_with_confusion,
                  TemplateId::without_context}) {
    if (to_string(id) == s) return id;
  }
  return std::nullopt;
}

std::filesystem::path PromptLibrary::default_dir() {
  if (const char* env = std::getenv("CWALK_PROMPTS"); env && *env) return env;
  return CWALK_PROMPT_DIR;
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
  PromptLibrary lib;
  for (auto id : {TemplateId::facilitator, TemplateId::evaluator_plain, TemplateId::evaluator_with_confusion,
                  TemplateId::without_context}) {
    const auto file = dir / (std::string(to_string(id)) + ".txt");
    std::error_code ec;
    if (!std::filesystem::is_regular_file(file, ec)) continue;
    auto content = io::read_file(file);
    // Editors append a final newline; it is not part of the prompt.
    while (!content.empty() && (content.back() == '\n' || content.back() == '\r')) content.pop_back();
    lib.set(id, std::move(content));
  }
  return lib;
}

void PromptLibrary::set(TemplateId id, std::string text) { templates_[id] = std::move(text); }

bool PromptLibrary::has(TemplateId id) const { return templates_.count(id) != 0; }

const std::string& PromptLibrary::raw(TemplateId id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw Error(Errc::UnknownTemplate, "no template '" + std::string(to_string(id)) + "'");
  return it->second;
}

std::string PromptLibrary::render(TemplateId id, std::string_view task_description) const {
  const auto& tmpl = raw(id);
  if (text::trim(task_description).empty()) throw Error(Errc::EmptyTask, "task description is empty");
  std::string out;
  std::size_t pos = 0;
  for (auto hit = tmpl.find(kTaskPlaceholder); hit != std::string::npos; hit = tmpl.find(kTaskPlaceholder, pos)) {
    out.append(tmpl, pos, hit - pos);
    out.append(task_description);
    pos = hit + kTaskPlaceholder.size();
  }
  out.append(tmpl, pos);
  return out;
}

std::string PromptLibrary::render(std::string_view template_id, std::string_view task_description) const {
  auto id = parse_template_id(template_id);
  if (!id) throw Error(Errc::UnknownTemplate, "unknown template '" + std::string(template_id) + "'");
  return render(*id, task_description);
}

}  // namespace cwalk
