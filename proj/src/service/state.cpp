// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include "aor/service/state.hpp"

#include <algorithm>

#include "aor/error.hpp"
#include "aor/json_codec.hpp"

namespace aor::service {
using anchoring::ProxyId;
using nlohmann::json;

namespace {

[[noreturn]] void reject(const std::string& what) { throw Error(ErrorCode::kLog, what); }

ProxyId proxy_field(const json& payload, const char* key) {
    const auto id = ProxyId::parse(payload.at(key).get<std::string>());
    if (!id) reject(std::string("bad proxy id in '") + key + "'");
    return *id;
}

std::optional<ProxyId> optional_proxy(const json& payload, const char* key) {
    if (!payload.contains(key) || payload.at(key).is_null()) return std::nullopt;
    return proxy_field(payload, key);
}

anchoring::ProxyState state_field(const json& payload, const char* key) {
    const auto state = anchoring::parse_proxy_state(payload.at(key).get<std::string>());
    if (!state) reject(std::string("bad proxy state in '") + key + "'");
    return *state;
}

std::vector<ProxyId> proxy_list(const json& j) {
    std::vector<ProxyId> out;
    for (const auto& item : j) {
        const auto id = ProxyId::parse(item.get<std::string>());
        if (!id) reject("bad proxy id in list");
        out.push_back(*id);
    }
    return out;
}

json proxy_list_json(const std::vector<ProxyId>& ids) {
    json out = json::array();
    for (const auto id : ids) out.push_back(id.str());
    return out;
}

json opt_string(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

}  // namespace

std::string comparer_job_id(std::uint32_t n) { return "cmp-" + std::to_string(n); }

json policy_to_json(const detection::FilterPolicy& policy) {
    return {{"denylist", policy.denylist},
            {"allowlist", policy.allowlist},
            {"min_confidence", policy.min_confidence}};
}

detection::FilterPolicy policy_from_json(const json& j) {
    detection::FilterPolicy policy;
    policy.denylist.clear();
    for (const auto& label : j.at("denylist")) policy.denylist.insert(label.get<std::string>());
    for (const auto& label : j.at("allowlist")) policy.allowlist.insert(label.get<std::string>());
    policy.min_confidence = j.at("min_confidence").get<double>();
    policy.validate();
    return policy;
}

json proxy_to_json(const anchoring::ObjectProxy& p) {
    return {{"id", p.id.str()},
            {"label", p.label},
            {"refined_label", opt_string(p.refined_label)},
            {"world_pos", codec::point(p.world_pos)},
            {"crop", codec::crop_ref(p.crop)},
            {"state", anchoring::to_string(p.state)},
            {"conversation", opt_string(p.conversation)},
            {"first_seen", p.first_seen},
            {"last_seen", p.last_seen},
            {"marked", p.marked}};
}

json conversation_to_json(const conversation::ConversationState& c) {
    json turns = json::array();
    for (const auto& t : c.turns) {
        json images = json::array();
        for (const auto& ref : t.images) images.push_back(codec::crop_ref(ref));
        turns.push_back({{"role", mllm::to_string(t.role)},
                         {"text", t.text},
                         {"images", images},
                         {"failed", t.failed}});
    }
    return {{"id", c.id},
            {"proxy", c.proxy ? json(c.proxy->str()) : json(nullptr)},
            {"context_crop", codec::crop_ref(c.context_crop)},
            {"turns", turns}};
}

void SessionState::apply(const SessionEvent& event) {
    const std::string where = "seq " + std::to_string(event.seq) + " (" +
                              std::string(to_string(event.kind)) + "): ";
    if (event.seq != last_seq_ + 1) {
        reject(where + "expected seq " + std::to_string(last_seq_ + 1));
    }
    if (event.t_ms < now_ms_) reject(where + "time moved backwards");
    if (!started_ && event.kind != EventKind::kSessionStarted) {
        reject(where + "log must begin with SessionStarted");
    }
    try {
        apply_unchecked(event);
    } catch (const json::exception& e) {
        reject(where + "malformed payload: " + e.what());
    } catch (const Error& e) {
        reject(where + e.what());
    }
    last_seq_ = event.seq;
    now_ms_ = event.t_ms;
}

void SessionState::apply_unchecked(const SessionEvent& event) {
    const json& p = event.payload;

    for (const auto& fired : widgets_.tick(event.t_ms)) unreported_fires_.insert(fired.id);
    if (event.kind != EventKind::kWidgetFired && !unreported_fires_.empty()) {
        reject("widget " + unreported_fires_.begin()->str() + " expired without a WidgetFired event");
    }

    switch (event.kind) {
        case EventKind::kSessionStarted: {
            if (started_) reject("session already started");
            policy_ = policy_from_json(p.at("policy"));
            registry_ = anchoring::ProxyRegistry(p.at("dedup_radius").get<double>());
            config_ = p;
            started_ = true;
            break;
        }
        case EventKind::kFrameProcessed: {
            const auto frame = p.at("frame").get<std::size_t>();
            if (current_frame_ && frame <= *current_frame_) reject("frame index did not advance");
            current_frame_ = frame;
            ++frames_processed_;
            break;
        }
        case EventKind::kProxySpawned: {
            const ProxyId id = proxy_field(p, "proxy");
            if (id != registry_.next_id()) reject("proxy ids must be allocated in order");
            const auto frame = p.at("frame").get<std::size_t>();
            if (!current_frame_ || frame != *current_frame_) reject("spawn outside the current frame");
            registry_.spawn(id, p.at("label").get<std::string>(), codec::point_from(p.at("world_pos")),
                            codec::crop_ref_from(p.at("crop")), frame);
            break;
        }
        case EventKind::kProxyUpdated: {
            const ProxyId id = proxy_field(p, "proxy");
            if (p.contains("frame")) {
                std::optional<CropRef> crop;
                if (p.contains("crop")) crop = codec::crop_ref_from(p.at("crop"));
                if (crop && crop->bbox.area() <= registry_.get(id).crop.bbox.area()) {
                    reject("crop replaced by one that is not larger");
                }
                registry_.touch(id, p.at("frame").get<std::size_t>(), crop);
            }
            if (p.contains("refined_label")) {
                registry_.set_refined_label(id, p.at("refined_label").get<std::string>());
            }
            break;
        }
        case EventKind::kProxyRemoved: {
            registry_.remove(proxy_field(p, "proxy"));
            break;
        }
        case EventKind::kStateChanged: {
            const ProxyId id = proxy_field(p, "proxy");
            const auto from = state_field(p, "from");
            if (registry_.get(id).state != from) reject("'from' does not match " + id.str());
            registry_.transition(id, state_field(p, "to"));
            break;
        }
        case EventKind::kConversationOpened: {
            const auto id = p.at("conversation").get<std::string>();
            const auto proxy = optional_proxy(p, "proxy");
            if (proxy) {
                if (id != conversation::conversation_id_for(*proxy)) reject("unexpected conversation id");
                registry_.attach_conversation(*proxy, id);
            } else {
                if (id != comparer_job_id(comparer_jobs_opened_ + 1)) reject("unexpected comparer job id");
                ++comparer_jobs_opened_;
            }
            conversations_.open(id, proxy, codec::crop_ref_from(p.at("context_crop")));
            break;
        }
        case EventKind::kMllmRequested: {
            for (const auto& label : p.at("labels")) {
                if (policy_.is_denylisted(label.get<std::string>())) {
                    reject("request carries denylisted label '" + label.get<std::string>() + "'");
                }
            }
            std::vector<CropRef> images;
            for (const auto& ref : p.at("images")) images.push_back(codec::crop_ref_from(ref));
            conversations_.get(p.at("conversation").get<std::string>())
                .append_user(p.at("prompt").get<std::string>(), std::move(images));
            break;
        }
        case EventKind::kMllmReplied: {
            auto& conv = conversations_.get(p.at("conversation").get<std::string>());
            if (p.at("ok").get<bool>()) {
                conv.append_assistant(p.at("text").get<std::string>());
            } else {
                conv.append_failure(p.at("error").get<std::string>());
            }
            break;
        }
        case EventKind::kComparerCompleted: {
            ComparerRecord rec;
            rec.job = p.at("job").get<std::string>();
            rec.conversation = p.at("conversation").get<std::string>();
            if (!conversations_.contains(rec.conversation)) reject("unknown comparer conversation");
            if (std::any_of(comparer_jobs_.begin(), comparer_jobs_.end(),
                            [&](const ComparerRecord& r) { return r.job == rec.job; })) {
                reject("comparer job completed twice");
            }
            rec.proxies = proxy_list(p.at("proxies"));
            rec.prompt = p.at("prompt").get<std::string>();
            rec.answer = p.at("answer").get<std::string>();
            if (!p.at("indices").is_null()) rec.indices = p.at("indices").get<std::vector<int>>();
            if (!p.at("error").is_null()) rec.error = p.at("error").get<std::string>();
            comparer_jobs_.push_back(std::move(rec));
            break;
        }
        case EventKind::kMarksChanged: {
            registry_.mark(proxy_list(p.at("marked")));
            break;
        }
        case EventKind::kWidgetCreated: {
            auto widget = actions::widget_from_json(p.at("widget"));
            if (widget.created_at_ms != event.t_ms) reject("widget creation time differs from event time");
            registry_.get(widget.proxy);
            widgets_.insert(std::move(widget));
            break;
        }
        case EventKind::kWidgetFired: {
            const auto id = actions::WidgetId::parse(p.at("widget").get<std::string>());
            if (!id) reject("bad widget id");
            if (reported_fires_.count(*id)) reject("widget " + id->str() + " fired twice");
            if (!unreported_fires_.erase(*id)) reject("widget " + id->str() + " has not expired");
            reported_fires_.insert(*id);
            break;
        }
        case EventKind::kShared: {
            shares_.push_back(actions::share_from_json(p.at("share")));
            break;
        }
        case EventKind::kShoppingListAdded: {
            shopping_.append(actions::shopping_entry_from_json(p.at("entry")));
            break;
        }
        case EventKind::kClockAdvanced: {
            if (p.at("now_ms").get<std::int64_t>() != event.t_ms) reject("clock value differs from event time");
            break;
        }
        case EventKind::kError: {
            errors_.push_back({event.seq, p.at("code").get<std::string>(), p.at("reason").get<std::string>()});
            break;
        }
    }
}

SessionState SessionState::fold(std::span<const SessionEvent> events) {
    SessionState state;
    for (const auto& e : events) state.apply(e);
    return state;
}

json SessionState::to_json() const {
    json proxies = json::array();
    for (const auto& [id, proxy] : registry_.proxies()) proxies.push_back(proxy_to_json(proxy));
    json conversations = json::array();
    for (const auto& [id, conv] : conversations_.all()) conversations.push_back(conversation_to_json(conv));
    json widgets = json::array();
    for (const auto& [id, w] : widgets_.widgets()) widgets.push_back(actions::to_json(w));
    json shopping = json::array();
    for (const auto& e : shopping_.entries()) shopping.push_back(actions::to_json(e));
    json shares = json::array();
    for (const auto& s : shares_) shares.push_back(actions::to_json(s));
    json jobs = json::array();
    for (const auto& r : comparer_jobs_) {
        jobs.push_back({{"job", r.job},
                        {"conversation", r.conversation},
                        {"proxies", proxy_list_json(r.proxies)},
                        {"prompt", r.prompt},
                        {"answer", r.answer},
                        {"indices", r.indices ? json(*r.indices) : json(nullptr)},
                        {"error", opt_string(r.error)}});
    }
    json errors = json::array();
    for (const auto& e : errors_) errors.push_back({{"seq", e.seq}, {"code", e.code}, {"reason", e.reason}});

    return {{"seq", last_seq_},
            {"now_ms", now_ms_},
            {"frame", current_frame_ ? json(*current_frame_) : json(nullptr)},
            {"frames_processed", frames_processed_},
            {"config", config_},
            {"proxies", proxies},
            {"conversations", conversations},
            {"widgets", widgets},
            {"shopping", shopping},
            {"shares", shares},
            {"comparer_jobs", jobs},
            {"errors", errors}};
}

}  // namespace aor::service
