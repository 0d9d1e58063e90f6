// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include "aor/actions.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <regex>

#include "aor/error.hpp"
#include "aor/json_codec.hpp"

namespace aor::actions {
using nlohmann::json;

namespace {

constexpr std::array<CatalogEntry, 8> kCatalog{{
    {ActionCategory::kInformation, ActionId::kInfo, "Info"},
    {ActionCategory::kInformation, ActionId::kAsk, "Ask a question"},
    {ActionCategory::kCompare, ActionId::kCompare, "Compare"},
    {ActionCategory::kShare, ActionId::kSendToContact, "Send to contact"},
    {ActionCategory::kShare, ActionId::kAddToShoppingList, "Add to shopping list"},
    {ActionCategory::kAnchor, ActionId::kNote, "Note"},
    {ActionCategory::kAnchor, ActionId::kTimer, "Timer"},
    {ActionCategory::kAnchor, ActionId::kCountdown, "Countdown"},
}};

[[noreturn]] void invalid(ActionId action, const std::string& what) {
    throw Error(ErrorCode::kValidation, std::string(to_string(action)) + ": " + what);
}

bool is_blank(const std::string& text) {
    return std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); });
}

const json* field(const json& args, const char* key) {
    if (!args.is_object()) return nullptr;
    const auto it = args.find(key);
    return it == args.end() ? nullptr : &*it;
}

std::string required_text(ActionId action, const json& args, const char* key) {
    const json* value = field(args, key);
    if (!value || !value->is_string()) invalid(action, std::string("'") + key + "' must be a string");
    const auto text = value->get<std::string>();
    if (is_blank(text)) invalid(action, std::string("'") + key + "' must not be empty");
    return text;
}

}  // namespace

std::span<const CatalogEntry> catalog() { return kCatalog; }

ActionCategory category_of(ActionId action) {
    for (const auto& entry : kCatalog) {
        if (entry.action == action) return entry.category;
    }
    throw Error(ErrorCode::kNotFound, "unknown action");
}

std::vector<ActionCategory> categories() {
    std::vector<ActionCategory> out;
    for (const auto& entry : kCatalog) {
        if (std::find(out.begin(), out.end(), entry.category) == out.end()) {
            out.push_back(entry.category);
        }
    }
    return out;
}

void validate_args(ActionId action, const json& args) {
    if (!args.is_null() && !args.is_object()) invalid(action, "arguments must be an object");
    switch (action) {
        case ActionId::kInfo:
        case ActionId::kAddToShoppingList:
        case ActionId::kTimer:
            return;
        case ActionId::kAsk:
            required_text(action, args, "question");
            return;
        case ActionId::kCompare: {
            required_text(action, args, "prompt");
            const json* with = field(args, "with");
            if (!with || !with->is_array() || with->empty()) {
                invalid(action, "'with' must list at least one other proxy");
            }
            for (const auto& id : *with) {
                if (!id.is_string() || !anchoring::ProxyId::parse(id.get<std::string>())) {
                    invalid(action, "'with' entries must be proxy ids");
                }
            }
            return;
        }
        case ActionId::kSendToContact: {
            required_text(action, args, "recipient");
            const json* message = field(args, "message");
            if (message && !message->is_string()) invalid(action, "'message' must be a string");
            return;
        }
        case ActionId::kNote: {
            required_text(action, args, "text");
            if (const json* vis = field(args, "visibility")) {
                if (!vis->is_string()) invalid(action, "'visibility' must be a string");
                NoteVisibility::parse(vis->get<std::string>());
            }
            return;
        }
        case ActionId::kCountdown: {
            const json* duration = field(args, "duration_s");
            const json* from_reply = field(args, "from_reply_of");
            if ((duration != nullptr) == (from_reply != nullptr)) {
                invalid(action, "give exactly one of 'duration_s' or 'from_reply_of'");
            }
            if (duration) {
                if (!duration->is_number() || !std::isfinite(duration->get<double>()) ||
                    duration->get<double>() <= 0) {
                    invalid(action, "'duration_s' must be a positive number");
                }
            } else if (!from_reply->is_string() ||
                       !anchoring::ProxyId::parse(from_reply->get<std::string>())) {
                invalid(action, "'from_reply_of' must be a proxy id");
            }
            return;
        }
    }
}

double parse_duration_seconds(std::string_view text) {
    static const std::regex pattern(
        R"((\d+(?:\.\d+)?)\s*(hours?|hrs?|h|minutes?|mins?|m|seconds?|secs?|s)\b)",
        std::regex::icase);
    const std::string haystack(text);
    double total = 0;
    bool any = false;
    for (auto it = std::sregex_iterator(haystack.begin(), haystack.end(), pattern);
         it != std::sregex_iterator(); ++it) {
        const double amount = std::stod((*it)[1].str());
        std::string unit = (*it)[2].str();
        std::transform(unit.begin(), unit.end(), unit.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        const double scale = unit[0] == 'h' ? 3600 : unit[0] == 'm' ? 60 : 1;
        total += amount * scale;
        any = true;
    }
    if (!any || total <= 0) {
        throw Error(ErrorCode::kValidation, "no duration found in '" + haystack + "'");
    }
    return total;
}

std::string WidgetId::str() const { return "w" + std::to_string(value); }

std::optional<WidgetId> WidgetId::parse(std::string_view text) {
    if (text.size() < 2 || text.front() != 'w') return std::nullopt;
    std::uint32_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data() + 1, text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || value == 0) return std::nullopt;
    return WidgetId{value};
}

std::string NoteVisibility::str() const {
    switch (scope) {
        case Scope::kPrivate: return "private";
        case Scope::kPublic: return "public";
        case Scope::kGroup: return "group:" + group;
    }
    return "private";
}

NoteVisibility NoteVisibility::parse(std::string_view text) {
    if (text == "private") return {};
    if (text == "public") return {Scope::kPublic, {}};
    constexpr std::string_view prefix = "group:";
    if (text.substr(0, prefix.size()) == prefix && text.size() > prefix.size()) {
        return {Scope::kGroup, std::string(text.substr(prefix.size()))};
    }
    throw Error(ErrorCode::kValidation,
                "note: visibility must be private, public or group:<name>");
}

std::string_view kind_name(const WidgetKind& kind) {
    switch (kind.index()) {
        case 0: return "note";
        case 1: return "timer";
        default: return "countdown";
    }
}

WidgetKind make_widget_kind(ActionId action, const json& args, std::int64_t now_ms) {
    validate_args(action, args);
    switch (action) {
        case ActionId::kNote: {
            NoteWidget note;
            note.text = args.at("text").get<std::string>();
            if (args.contains("visibility")) {
                note.visibility = NoteVisibility::parse(args.at("visibility").get<std::string>());
            }
            return note;
        }
        case ActionId::kTimer:
            return TimerWidget{now_ms, 0};
        case ActionId::kCountdown: {
            if (!args.contains("duration_s")) {
                invalid(action, "duration must be resolved before creating the widget");
            }
            const auto duration_ms =
                static_cast<std::int64_t>(std::llround(args.at("duration_s").get<double>() * 1000.0));
            if (duration_ms <= 0) invalid(action, "duration rounds to zero");
            return CountdownWidget{duration_ms, duration_ms, false};
        }
        default:
            invalid(action, "does not create a widget");
    }
}

void WidgetBoard::insert(Widget widget) {
    if (widget.id.value < next_id_ || widgets_.count(widget.id)) {
        throw Error(ErrorCode::kState, "widget id " + widget.id.str() + " already used");
    }
    if (widget.created_at_ms < now_ms_) {
        throw Error(ErrorCode::kClock, "widget " + widget.id.str() + " created in the past");
    }
    if (const auto* note = std::get_if<NoteWidget>(&widget.kind)) {
        if (is_blank(note->text)) throw Error(ErrorCode::kValidation, "note: empty text");
    }
    if (const auto* countdown = std::get_if<CountdownWidget>(&widget.kind)) {
        if (countdown->duration_ms <= 0 || countdown->remaining_ms < 0 ||
            countdown->remaining_ms > countdown->duration_ms) {
            throw Error(ErrorCode::kValidation, "countdown: remaining outside [0, duration]");
        }
    }
    next_id_ = widget.id.value + 1;
    widgets_.emplace(widget.id, std::move(widget));
}

WidgetId WidgetBoard::create(anchoring::ProxyId proxy, WidgetKind kind, std::int64_t now_ms) {
    const WidgetId id{next_id_};
    insert(Widget{id, proxy, now_ms, std::move(kind)});
    return id;
}

std::vector<FiredWidget> WidgetBoard::tick(std::int64_t now_ms) {
    if (now_ms < now_ms_) {
        throw Error(ErrorCode::kClock, "tick: clock moved backwards from " +
                                           std::to_string(now_ms_) + " to " + std::to_string(now_ms));
    }
    now_ms_ = now_ms;
    std::vector<FiredWidget> fired;
    for (auto& [id, widget] : widgets_) {
        const std::int64_t age = std::max<std::int64_t>(0, now_ms - widget.created_at_ms);
        if (auto* timer = std::get_if<TimerWidget>(&widget.kind)) {
            timer->elapsed_ms = std::max<std::int64_t>(0, now_ms - timer->started_at_ms);
        } else if (auto* countdown = std::get_if<CountdownWidget>(&widget.kind)) {
            countdown->remaining_ms = std::max<std::int64_t>(0, countdown->duration_ms - age);
            if (countdown->remaining_ms == 0 && !countdown->fired) {
                countdown->fired = true;
                fired.push_back({id, widget.proxy, widget.created_at_ms + countdown->duration_ms});
            }
        }
    }
    return fired;
}

const Widget& WidgetBoard::get(WidgetId id) const {
    const auto it = widgets_.find(id);
    if (it == widgets_.end()) throw Error(ErrorCode::kNotFound, "unknown widget " + id.str());
    return it->second;
}

ProxySnapshot snapshot_of(const anchoring::ObjectProxy& proxy) {
    return {proxy.id, proxy.label, proxy.refined_label, proxy.world_pos, proxy.crop};
}

const ShoppingEntry& ShoppingList::add(const anchoring::ObjectProxy& proxy, std::int64_t now_ms) {
    entries_.push_back({snapshot_of(proxy), now_ms});
    return entries_.back();
}

SharePayload make_share(const anchoring::ObjectProxy& proxy, const std::string& recipient,
                        const std::string& message, std::int64_t now_ms) {
    if (is_blank(recipient)) throw Error(ErrorCode::kValidation, "share: empty recipient");
    return {recipient, snapshot_of(proxy), message, now_ms};
}

JsonlFile::JsonlFile(std::filesystem::path path) : path_(std::move(path)) {}

void JsonlFile::append(const json& record) const {
    const std::string line = record.dump() + "\n";
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorCode::kIo, "cannot open " + path_.string());
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "short write to " + path_.string());
}

json to_json(const ProxySnapshot& s) {
    json j{{"id", s.id.str()},
           {"label", s.label},
           {"world_pos", codec::point(s.world_pos)},
           {"crop", codec::crop_ref(s.crop)}};
    j["refined_label"] = s.refined_label ? json(*s.refined_label) : json(nullptr);
    return j;
}

ProxySnapshot proxy_snapshot_from_json(const json& j) {
    ProxySnapshot s;
    const auto id = anchoring::ProxyId::parse(j.at("id").get<std::string>());
    if (!id) throw Error(ErrorCode::kParse, "bad proxy id");
    s.id = *id;
    s.label = j.at("label").get<std::string>();
    if (!j.at("refined_label").is_null()) s.refined_label = j.at("refined_label").get<std::string>();
    s.world_pos = codec::point_from(j.at("world_pos"));
    s.crop = codec::crop_ref_from(j.at("crop"));
    return s;
}

json to_json(const SharePayload& p) {
    return {{"recipient", p.recipient}, {"proxy", to_json(p.proxy)}, {"message", p.message},
            {"at_ms", p.at_ms}};
}

SharePayload share_from_json(const json& j) {
    return {j.at("recipient").get<std::string>(), proxy_snapshot_from_json(j.at("proxy")),
            j.at("message").get<std::string>(), j.at("at_ms").get<std::int64_t>()};
}

json to_json(const ShoppingEntry& e) {
    return {{"proxy", to_json(e.proxy)}, {"added_at_ms", e.added_at_ms}};
}

ShoppingEntry shopping_entry_from_json(const json& j) {
    return {proxy_snapshot_from_json(j.at("proxy")), j.at("added_at_ms").get<std::int64_t>()};
}

json to_json(const Widget& w) {
    json j{{"id", w.id.str()},
           {"proxy", w.proxy.str()},
           {"created_at_ms", w.created_at_ms},
           {"kind", kind_name(w.kind)}};
    if (const auto* note = std::get_if<NoteWidget>(&w.kind)) {
        j["text"] = note->text;
        j["visibility"] = note->visibility.str();
    } else if (const auto* timer = std::get_if<TimerWidget>(&w.kind)) {
        j["started_at_ms"] = timer->started_at_ms;
        j["elapsed_ms"] = timer->elapsed_ms;
    } else if (const auto* countdown = std::get_if<CountdownWidget>(&w.kind)) {
        j["duration_ms"] = countdown->duration_ms;
        j["remaining_ms"] = countdown->remaining_ms;
        j["fired"] = countdown->fired;
    }
    return j;
}

Widget widget_from_json(const json& j) {
    Widget w;
    const auto id = WidgetId::parse(j.at("id").get<std::string>());
    const auto proxy = anchoring::ProxyId::parse(j.at("proxy").get<std::string>());
    if (!id || !proxy) throw Error(ErrorCode::kParse, "bad widget or proxy id");
    w.id = *id;
    w.proxy = *proxy;
    w.created_at_ms = j.at("created_at_ms").get<std::int64_t>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "note") {
        w.kind = NoteWidget{j.at("text").get<std::string>(),
                            NoteVisibility::parse(j.at("visibility").get<std::string>())};
    } else if (kind == "timer") {
        w.kind = TimerWidget{j.at("started_at_ms").get<std::int64_t>(),
                             j.at("elapsed_ms").get<std::int64_t>()};
    } else if (kind == "countdown") {
        w.kind = CountdownWidget{j.at("duration_ms").get<std::int64_t>(),
                                 j.at("remaining_ms").get<std::int64_t>(), j.at("fired").get<bool>()};
    } else {
        throw Error(ErrorCode::kParse, "unknown widget kind '" + kind + "'");
    }
    return w;
}

}  // namespace aor::actions
