// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#include "cwalk/error.hpp"

namespace cwalk {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::ManifestSyntax: return "ManifestSyntax";
    case Errc::DanglingReference: return "DanglingReference";
    case Errc::MissingImage: return "MissingImage";
    case Errc::InvalidCorrectPath: return "InvalidCorrectPath";
    case Errc::InvalidGraph: return "InvalidGraph";
    case Errc::UnknownScreen: return "UnknownScreen";
    case Errc::UnknownTask: return "UnknownTask";
    case Errc::NoJsonFound: return "NoJsonFound";
    case Errc::SchemaViolation: return "SchemaViolation";
    case Errc::ModeMismatch: return "ModeMismatch";
    case Errc::UnknownTemplate: return "UnknownTemplate";
    case Errc::EmptyTask: return "EmptyTask";
    case Errc::GraphTaskMismatch: return "GraphTaskMismatch";
    case Errc::TaskMismatch: return "TaskMismatch";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::SessionClosed: return "SessionClosed";
    case Errc::Transport: return "Transport";
    case Errc::RateLimited: return "RateLimited";
    case Errc::ScriptExhausted: return "ScriptExhausted";
    case Errc::ReplayMiss: return "ReplayMiss";
    case Errc::IoFailure: return "IoFailure";
    case Errc::RatingFailed: return "RatingFailed";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::EmptyPaths: return "EmptyPaths";
    case Errc::ZeroMassSupport: return "ZeroMassSupport";
    case Errc::SupportMismatch: return "SupportMismatch";
    case Errc::LengthMismatch: return "LengthMismatch";
  }
  return "Unknown";
}

}  // namespace cwalk
