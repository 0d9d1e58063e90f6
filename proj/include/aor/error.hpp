// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aor {

enum class ErrorCode {
    kInvalidDepth,
    kOutOfBounds,
    kLoad,
    kEmptyCrop,
    kValidation,
    kPrecondition,
    kState,
    kNotFound,
    kParse,
    kOutOfRange,
    kBackendUnavailable,
    kTimeout,
    kReplayMiss,
    kIo,
    kPrivacy,
    kClock,
    kProtocol,
    kActionFailed,
    kLog,
    kStartup,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the runtime carries a code so callers (and the
/// event log) can classify it without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace aor
