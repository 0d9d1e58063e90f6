// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace aor::service {

enum class EventKind {
    kSessionStarted,
    kFrameProcessed,
    kProxySpawned,
    kProxyUpdated,
    kProxyRemoved,
    kStateChanged,
    kConversationOpened,
    kMllmRequested,
    kMllmReplied,
    kComparerCompleted,
    kMarksChanged,
    kWidgetCreated,
    kWidgetFired,
    kShared,
    kShoppingListAdded,
    kClockAdvanced,
    kError,
};

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view text);

/// One append-only log record. `seq` starts at 1 and has no gaps; `t_ms` is
/// session (virtual or wall) time and never decreases.
struct SessionEvent {
    std::uint64_t seq{0};
    std::int64_t t_ms{0};
    EventKind kind{EventKind::kError};
    nlohmann::json payload = nlohmann::json::object();

    friend bool operator==(const SessionEvent&, const SessionEvent&) = default;
};

nlohmann::json to_json(const SessionEvent& event);
/// Throws Error(kLog) on a malformed record.
SessionEvent event_from_json(const nlohmann::json& j);

/// Compact single-line JSON with sorted keys; the log format.
std::string serialize_line(const SessionEvent& event);

/// Reads a JSONL event log. Throws Error(kLog) naming the bad line.
std::vector<SessionEvent> read_event_log(const std::filesystem::path& path);

/// Truncates on open; every append is flushed.
class EventLogWriter {
public:
    explicit EventLogWriter(const std::filesystem::path& path);
    void append(const SessionEvent& event);
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

}  // namespace aor::service
