// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include "aor/service/events.hpp"

#include <array>
#include <utility>

#include "aor/error.hpp"

namespace aor::service {
using nlohmann::json;

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 17> kKindNames{{
    {EventKind::kSessionStarted, "SessionStarted"},
    {EventKind::kFrameProcessed, "FrameProcessed"},
    {EventKind::kProxySpawned, "ProxySpawned"},
    {EventKind::kProxyUpdated, "ProxyUpdated"},
    {EventKind::kProxyRemoved, "ProxyRemoved"},
    {EventKind::kStateChanged, "StateChanged"},
    {EventKind::kConversationOpened, "ConversationOpened"},
    {EventKind::kMllmRequested, "MllmRequested"},
    {EventKind::kMllmReplied, "MllmReplied"},
    {EventKind::kComparerCompleted, "ComparerCompleted"},
    {EventKind::kMarksChanged, "MarksChanged"},
    {EventKind::kWidgetCreated, "WidgetCreated"},
    {EventKind::kWidgetFired, "WidgetFired"},
    {EventKind::kShared, "Shared"},
    {EventKind::kShoppingListAdded, "ShoppingListAdded"},
    {EventKind::kClockAdvanced, "ClockAdvanced"},
    {EventKind::kError, "Error"},
}};

}  // namespace

std::string_view to_string(EventKind kind) {
    for (const auto& [k, name] : kKindNames) {
        if (k == kind) return name;
    }
    return "Unknown";
}

std::optional<EventKind> parse_event_kind(std::string_view text) {
    for (const auto& [k, name] : kKindNames) {
        if (name == text) return k;
    }
    return std::nullopt;
}

json to_json(const SessionEvent& event) {
    return {{"seq", event.seq},
            {"t_ms", event.t_ms},
            {"kind", to_string(event.kind)},
            {"payload", event.payload}};
}

SessionEvent event_from_json(const json& j) {
    SessionEvent event;
    try {
        event.seq = j.at("seq").get<std::uint64_t>();
        event.t_ms = j.at("t_ms").get<std::int64_t>();
        const auto kind = parse_event_kind(j.at("kind").get<std::string>());
        if (!kind) throw Error(ErrorCode::kLog, "unknown event kind " + j.at("kind").dump());
        event.kind = *kind;
        event.payload = j.at("payload");
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kLog, std::string("malformed event: ") + e.what());
    }
    if (!event.payload.is_object()) throw Error(ErrorCode::kLog, "event payload must be an object");
    return event;
}

std::string serialize_line(const SessionEvent& event) { return to_json(event).dump(); }

std::vector<SessionEvent> read_event_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kLog, "cannot open event log " + path.string());
    std::vector<SessionEvent> events;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            events.push_back(event_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::kLog, path.string() + ":" + std::to_string(line_no) +
                                             ": malformed JSON: " + e.what());
        } catch (const Error& e) {
            throw Error(ErrorCode::kLog,
                        path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return events;
}

EventLogWriter::EventLogWriter(const std::filesystem::path& path)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error(ErrorCode::kIo, "cannot write event log " + path.string());
}

void EventLogWriter::append(const SessionEvent& event) {
    const std::string line = serialize_line(event) + "\n";
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.flush();
    if (!out_) throw Error(ErrorCode::kIo, "short write to " + path_.string());
}

}  // namespace aor::service
