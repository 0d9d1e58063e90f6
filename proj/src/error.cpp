// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include "aor/error.hpp"

namespace aor {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::kInvalidDepth: return "invalid-depth";
        case ErrorCode::kOutOfBounds: return "out-of-bounds";
        case ErrorCode::kLoad: return "load";
        case ErrorCode::kEmptyCrop: return "empty-crop";
        case ErrorCode::kValidation: return "validation";
        case ErrorCode::kPrecondition: return "precondition";
        case ErrorCode::kState: return "state";
        case ErrorCode::kNotFound: return "not-found";
        case ErrorCode::kParse: return "parse";
        case ErrorCode::kOutOfRange: return "out-of-range";
        case ErrorCode::kBackendUnavailable: return "backend-unavailable";
        case ErrorCode::kTimeout: return "timeout";
        case ErrorCode::kReplayMiss: return "replay-miss";
        case ErrorCode::kIo: return "io";
        case ErrorCode::kPrivacy: return "privacy";
        case ErrorCode::kClock: return "clock";
        case ErrorCode::kProtocol: return "protocol";
        case ErrorCode::kActionFailed: return "action-failed";
        case ErrorCode::kLog: return "log";
        case ErrorCode::kStartup: return "startup";
    }
    return "unknown";
}

}  // namespace aor
