// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cwalk {

enum class Errc {
  // app graph
  ManifestSyntax,
  DanglingReference,
  MissingImage,
  InvalidCorrectPath,
  InvalidGraph,
  UnknownScreen,
  UnknownTask,
  // protocol
  NoJsonFound,
  SchemaViolation,
  ModeMismatch,
  UnknownTemplate,
  EmptyTask,
  // engine
  GraphTaskMismatch,
  TaskMismatch,
  BackendUnavailable,
  InvalidConfig,
  SessionClosed,
  // backends
  Transport,
  RateLimited,
  ScriptExhausted,
  ReplayMiss,
  IoFailure,
  // rating
  RatingFailed,
  // metrics
  EmptyInput,
  EmptyPaths,
  ZeroMassSupport,
  SupportMismatch,
  LengthMismatch,
};

std::string_view errc_name(Errc code) noexcept;

/// Every failure raised by the library carries one of the typed codes above.
/// RatingFailed wraps the underlying parse or transport code as `cause`.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, std::optional<Errc> cause = std::nullopt)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code), cause_(cause) {}

  Errc code() const noexcept { return code_; }
  std::optional<Errc> cause() const noexcept { return cause_; }

 private:
  Errc code_;
  std::optional<Errc> cause_;
};

}  // namespace cwalk
