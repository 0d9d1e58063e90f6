// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "aor/action_id.hpp"
#include "aor/anchoring.hpp"
#include "aor/image.hpp"

namespace aor::actions {

struct CatalogEntry {
    ActionCategory category;
    ActionId action;
    std::string_view title;
};

/// The fixed context-menu taxonomy, in menu order.
std::span<const CatalogEntry> catalog();
ActionCategory category_of(ActionId action);
std::vector<ActionCategory> categories();

/// Checks dispatch arguments against the action's schema; throws kValidation.
void validate_args(ActionId action, const nlohmann::json& args);

/// Sums every "<number> <unit>" pair (seconds, minutes, hours) in the text.
/// "Cook for 10 minutes" -> 600. Throws kValidation when nothing parses.
double parse_duration_seconds(std::string_view text);

struct WidgetId {
    std::uint32_t value{0};

    std::string str() const;  // "w<value>"
    static std::optional<WidgetId> parse(std::string_view text);

    friend auto operator<=>(const WidgetId&, const WidgetId&) = default;
};

struct NoteVisibility {
    enum class Scope { kPrivate, kGroup, kPublic };

    Scope scope{Scope::kPrivate};
    std::string group;  // set iff scope == kGroup

    /// "private", "public" or "group:<name>".
    std::string str() const;
    static NoteVisibility parse(std::string_view text);

    friend bool operator==(const NoteVisibility&, const NoteVisibility&) = default;
};

struct NoteWidget {
    std::string text;
    NoteVisibility visibility;
    friend bool operator==(const NoteWidget&, const NoteWidget&) = default;
};

/// Counts up from creation.
struct TimerWidget {
    std::int64_t started_at_ms{0};
    std::int64_t elapsed_ms{0};
    friend bool operator==(const TimerWidget&, const TimerWidget&) = default;
};

/// Counts down to zero and fires once.
struct CountdownWidget {
    std::int64_t duration_ms{0};
    std::int64_t remaining_ms{0};
    bool fired{false};
    friend bool operator==(const CountdownWidget&, const CountdownWidget&) = default;
};

using WidgetKind = std::variant<NoteWidget, TimerWidget, CountdownWidget>;

struct Widget {
    WidgetId id;
    anchoring::ProxyId proxy;
    std::int64_t created_at_ms{0};
    WidgetKind kind;
    friend bool operator==(const Widget&, const Widget&) = default;
};

std::string_view kind_name(const WidgetKind& kind);

/// Builds the widget a Note/Timer/Countdown dispatch creates. Countdown
/// durations come from args["duration_s"]; callers resolve other forms first.
WidgetKind make_widget_kind(ActionId action, const nlohmann::json& args, std::int64_t now_ms);

struct FiredWidget {
    WidgetId id;
    anchoring::ProxyId proxy;
    std::int64_t expired_at_ms{0};
};

/// All widgets of a session plus the clock they were last advanced to.
class WidgetBoard {
public:
    WidgetId next_id() const { return {next_id_}; }

    /// Validates invariants and stores the widget under its id.
    void insert(Widget widget);
    WidgetId create(anchoring::ProxyId proxy, WidgetKind kind, std::int64_t now_ms);

    /// Advances every widget to `now_ms`. Countdowns reaching zero fire
    /// exactly once; simultaneous expiries come back in widget-id order.
    /// Throws kClock if time goes backwards.
    std::vector<FiredWidget> tick(std::int64_t now_ms);

    std::int64_t now_ms() const { return now_ms_; }
    const std::map<WidgetId, Widget>& widgets() const { return widgets_; }
    const Widget& get(WidgetId id) const;

    friend bool operator==(const WidgetBoard&, const WidgetBoard&) = default;

private:
    std::map<WidgetId, Widget> widgets_;
    std::uint32_t next_id_{1};
    std::int64_t now_ms_{0};
};

/// Frozen view of a proxy for lists and payloads.
struct ProxySnapshot {
    anchoring::ProxyId id;
    std::string label;
    std::optional<std::string> refined_label;
    geometry::WorldPoint world_pos = geometry::WorldPoint::Zero();
    CropRef crop;
    friend bool operator==(const ProxySnapshot&, const ProxySnapshot&) = default;
};

ProxySnapshot snapshot_of(const anchoring::ObjectProxy& proxy);

struct ShoppingEntry {
    ProxySnapshot proxy;
    std::int64_t added_at_ms{0};
    friend bool operator==(const ShoppingEntry&, const ShoppingEntry&) = default;
};

/// Append-only; the same proxy may appear repeatedly.
class ShoppingList {
public:
    const ShoppingEntry& add(const anchoring::ObjectProxy& proxy, std::int64_t now_ms);
    void append(ShoppingEntry entry) { entries_.push_back(std::move(entry)); }
    const std::vector<ShoppingEntry>& entries() const { return entries_; }

    friend bool operator==(const ShoppingList&, const ShoppingList&) = default;

private:
    std::vector<ShoppingEntry> entries_;
};

struct SharePayload {
    std::string recipient;
    ProxySnapshot proxy;
    std::string message;
    std::int64_t at_ms{0};
    friend bool operator==(const SharePayload&, const SharePayload&) = default;
};

/// Throws kValidation for an empty recipient.
SharePayload make_share(const anchoring::ObjectProxy& proxy, const std::string& recipient,
                        const std::string& message, std::int64_t now_ms);

/// Appends one JSON document per line. A write either lands completely or
/// throws kIo.
class JsonlFile {
public:
    explicit JsonlFile(std::filesystem::path path);
    void append(const nlohmann::json& record) const;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

nlohmann::json to_json(const ProxySnapshot& snapshot);
nlohmann::json to_json(const SharePayload& payload);
nlohmann::json to_json(const ShoppingEntry& entry);
nlohmann::json to_json(const Widget& widget);
ProxySnapshot proxy_snapshot_from_json(const nlohmann::json& j);
SharePayload share_from_json(const nlohmann::json& j);
ShoppingEntry shopping_entry_from_json(const nlohmann::json& j);
Widget widget_from_json(const nlohmann::json& j);

}  // namespace aor::actions
