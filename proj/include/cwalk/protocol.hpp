// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace cwalk {

enum class Confidence { low, medium, high };
enum class ConfusionRating { not_at_all, slightly, very };
enum class BinaryRating { not_confusing, confusing };

std::string_view to_string(Confidence c) noexcept;
std::string_view to_string(ConfusionRating r) noexcept;
std::string_view to_string(BinaryRating b) noexcept;

/// Case-insensitive; accepts "High", " medium ".
std::optional<Confidence> parse_confidence(std::string_view s);
/// Accepts canonical tokens ("not_at_all") and the prose scale used in the
/// prompts ("Not at all confusing", "slightly confusing", "Very confusing").
std::optional<ConfusionRating> parse_confusion(std::string_view s);
std::optional<BinaryRating> parse_binary(std::string_view s);

/// not_at_all is the only level that maps to not_confusing.
BinaryRating collapse_rating(ConfusionRating r) noexcept;

struct PossibleAction {
  std::string action;
  std::string rationale;
  Confidence confidence = Confidence::medium;

  bool operator==(const PossibleAction&) const = default;
};

struct EvaluatorResponse {
  std::string current_state;
  std::vector<PossibleAction> possible_actions;
  std::string next_action;
  std::string next_action_rationale;
  std::optional<ConfusionRating> confusion;
  std::optional<std::string> confusion_rationale;
  bool declares_complete = false;

  bool operator==(const EvaluatorResponse&) const = default;
};

enum class ResponseMode { plain, with_confusion };

enum class FacilitatorMessageKind { task_intro, probe, failsafe, completion_query, parse_repair };

std::string_view to_string(FacilitatorMessageKind k) noexcept;
std::optional<FacilitatorMessageKind> parse_facilitator_message_kind(std::string_view s) noexcept;

struct FacilitatorMessage {
  FacilitatorMessageKind kind;
  std::string text;

  bool operator==(const FacilitatorMessage&) const = default;
};

inline constexpr std::string_view kFailsafeMessage =
    "The action you provided/identified is not available on the screen. Consider trying a different "
    "action here. Please revise your action.";

inline constexpr std::string_view kParseRepairMessage =
    "Your last reply was not valid JSON in the required format; resend only the JSON object.";

inline constexpr std::string_view kProbeMessage =
    "Why would you take that action, and how do you expect it to help you complete the task? "
    "Please think aloud and expand on your rationale.";

inline constexpr std::string_view kCompletionQueryMessage = "Have you completed the task?";

FacilitatorMessage failsafe_message();
FacilitatorMessage parse_repair_message();
FacilitatorMessage probe_message();
FacilitatorMessage completion_query_message();
FacilitatorMessage task_intro_message(std::string_view task_description);

/// Finds the first complete JSON object in free text. Code fences and
/// leading prose are skipped; a trailing comma before a closing bracket is
/// tolerated. Returns nullopt when no object parses.
std::optional<nlohmann::json> extract_json_object(std::string_view raw);

/// Throws NoJsonFound, SchemaViolation or ModeMismatch. In plain mode any
/// confusion fields are dropped so the result never carries a rating.
EvaluatorResponse parse_evaluator_response(std::string_view raw, ResponseMode mode);

/// Canonical snake_case JSON. parse_evaluator_response accepts it back.
nlohmann::json to_json(const EvaluatorResponse& r);

/// The two-field answer expected from the without-context rating prompt.
struct ConfusionAnswer {
  ConfusionRating rating;
  std::string rationale;
};

ConfusionAnswer parse_confusion_answer(std::string_view raw);

enum class TemplateId { facilitator, evaluator_plain, evaluator_with_confusion, without_context };

std::string_view to_string(TemplateId id) noexcept;
std::optional<TemplateId> parse_template_id(std::string_view s) noexcept;

inline constexpr std::string_view kTaskPlaceholder = "[Task description]";

/// Prompt templates live on disk, one `<template_id>.txt` per template.
class PromptLibrary {
 public:
  /// Loads every template present in `dir`. Missing files are reported by
  /// render() as UnknownTemplate.
  static PromptLibrary load(const std::filesystem::path& dir);

  /// The directory shipped with the build (CWALK_PROMPT_DIR), overridable by
  /// the CWALK_PROMPTS environment variable.
  static std::filesystem::path default_dir();

  void set(TemplateId id, std::string text);
  bool has(TemplateId id) const;
  const std::string& raw(TemplateId id) const;

  std::string render(TemplateId id, std::string_view task_description) const;
  std::string render(std::string_view template_id, std::string_view task_description) const;

 private:
  std::map<TemplateId, std::string> templates_;
};

}  // namespace cwalk
