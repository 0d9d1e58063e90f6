// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include "aor/service/session.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "aor/comparer.hpp"
#include "aor/conversation.hpp"
#include "aor/error.hpp"
#include "aor/json_codec.hpp"

namespace aor::service {
using anchoring::ProxyId;
using anchoring::ProxyState;
using nlohmann::json;

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

json detection_json(const detection::Detection& d) {
    return {{"label", d.label}, {"confidence", d.confidence}, {"bbox", codec::rect(d.bbox)}};
}

ProxyId parse_proxy(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_string()) {
        throw Error(ErrorCode::kProtocol, std::string("command: '") + key + "' must be a proxy id");
    }
    const auto id = ProxyId::parse(j.at(key).get<std::string>());
    if (!id) throw Error(ErrorCode::kProtocol, "command: bad proxy id " + j.at(key).dump());
    return *id;
}

std::string parse_text(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_string()) {
        throw Error(ErrorCode::kProtocol, std::string("command: '") + key + "' must be a string");
    }
    return j.at(key).get<std::string>();
}

json crop_list(const std::vector<CropRef>& refs) {
    json out = json::array();
    for (const auto& r : refs) out.push_back(codec::crop_ref(r));
    return out;
}

json id_list(const std::vector<ProxyId>& ids) {
    json out = json::array();
    for (const auto id : ids) out.push_back(id.str());
    return out;
}

}  // namespace

void VirtualClock::set(std::int64_t ms) {
    if (ms < now_ms_) throw Error(ErrorCode::kClock, "virtual clock cannot move backwards");
    now_ms_ = ms;
}

std::int64_t WallClock::now_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                 start_)
        .count();
}

ThreadExecutor::~ThreadExecutor() {
    std::vector<std::thread> threads;
    {
        std::lock_guard lock(mutex_);
        threads.swap(threads_);
    }
    for (auto& t : threads) t.join();
}

void ThreadExecutor::submit(std::function<void()> job) {
    std::lock_guard lock(mutex_);
    threads_.emplace_back(std::move(job));
}

Command parse_command(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::kProtocol, "command must be a JSON object");
    const std::string type = parse_text(j, "type");
    Command c;
    if (type == "select" || type == "dismiss") {
        c.type = type == "select" ? Command::Type::kSelect : Command::Type::kDismiss;
        c.proxy = parse_proxy(j, "proxy");
    } else if (type == "dispatch") {
        c.type = Command::Type::kDispatch;
        c.proxy = parse_proxy(j, "proxy");
        const auto action = parse_action_id(parse_text(j, "action"));
        if (!action) throw Error(ErrorCode::kProtocol, "command: unknown action " + j.at("action").dump());
        c.action = *action;
        if (j.contains("args")) c.args = j.at("args");
    } else if (type == "ask") {
        c.type = Command::Type::kAsk;
        c.proxy = parse_proxy(j, "proxy");
        c.action = ActionId::kAsk;
        c.text = parse_text(j, "question");
    } else if (type == "compare") {
        c.type = Command::Type::kCompare;
        c.action = ActionId::kCompare;
        c.text = parse_text(j, "prompt");
        if (!j.contains("proxies") || !j.at("proxies").is_array()) {
            throw Error(ErrorCode::kProtocol, "command: 'proxies' must be an array");
        }
        for (const auto& item : j.at("proxies")) {
            const auto id = item.is_string() ? ProxyId::parse(item.get<std::string>()) : std::nullopt;
            if (!id) throw Error(ErrorCode::kProtocol, "command: bad proxy id " + item.dump());
            c.proxies.push_back(*id);
        }
    } else {
        throw Error(ErrorCode::kProtocol, "command: unknown type '" + type + "'");
    }
    return c;
}

json to_json(const Command& c) {
    switch (c.type) {
        case Command::Type::kSelect: return {{"type", "select"}, {"proxy", c.proxy.str()}};
        case Command::Type::kDismiss: return {{"type", "dismiss"}, {"proxy", c.proxy.str()}};
        case Command::Type::kDispatch:
            return {{"type", "dispatch"},
                    {"proxy", c.proxy.str()},
                    {"action", to_string(c.action)},
                    {"args", c.args}};
        case Command::Type::kAsk:
            return {{"type", "ask"}, {"proxy", c.proxy.str()}, {"question", c.text}};
        case Command::Type::kCompare:
            return {{"type", "compare"}, {"proxies", id_list(c.proxies)}, {"prompt", c.text}};
    }
    return json::object();
}

void SessionConfig::validate() const {
    policy.validate();
    if (!(dedup_radius > 0) || !std::isfinite(dedup_radius)) {
        throw Error(ErrorCode::kValidation, "dedup radius must be a positive number");
    }
    if (depth_window != 1 && depth_window != 3 && depth_window != 5 && depth_window != 7) {
        throw Error(ErrorCode::kValidation, "depth window must be 1, 3, 5 or 7");
    }
    if (detect_every < 1) throw Error(ErrorCode::kValidation, "detect-every must be >= 1");
    if (session_id.empty() ||
        !std::all_of(session_id.begin(), session_id.end(), [](unsigned char ch) {
            return std::isalnum(ch) || ch == '-' || ch == '_';
        })) {
        throw Error(ErrorCode::kValidation, "session id must be [A-Za-z0-9_-]+");
    }
}

Session::Session(SessionConfig config, SessionDeps deps, Listener listener)
    : config_(std::move(config)), deps_(std::move(deps)), listener_(std::move(listener)) {
    config_.validate();
    if (!deps_.scene || !deps_.detector || !deps_.client || !deps_.clock || !deps_.executor) {
        throw Error(ErrorCode::kPrecondition, "session: missing dependency");
    }
    begin_batch();
    json payload{{"session_id", config_.session_id},
                 {"scene", deps_.scene->name},
                 {"frame_count", deps_.scene->frame_count()},
                 {"dedup_radius", config_.dedup_radius},
                 {"depth_window", config_.depth_window},
                 {"detect_every", config_.detect_every},
                 {"policy", policy_to_json(config_.policy)},
                 {"detector", deps_.detector->name()},
                 {"mllm", deps_.client->backend().tag()}};
    payload["stale_after_frames"] =
        config_.stale_after_frames ? json(*config_.stale_after_frames) : json(nullptr);
    emit(EventKind::kSessionStarted, std::move(payload));
    flush();
}

Session::~Session() {
    std::unique_lock lock(completions_mutex_);
    jobs_cv_.wait(lock, [this] { return jobs_in_flight_ == 0; });
}

void Session::begin_batch() {
    batch_start_ = log_.size();
    batch_now_ = std::max(deps_.clock->now_ms(), state_.now_ms());
    if (state_.started()) emit_fired_widgets();
}

void Session::emit(EventKind kind, json payload) {
    SessionEvent event{state_.last_seq() + 1, batch_now_, kind, std::move(payload)};
    state_.apply(event);
    log_.push_back(std::move(event));
}

void Session::emit_error(ErrorCode code, const std::string& reason, const json& command) {
    emit(EventKind::kError, {{"code", to_string(code)}, {"reason", reason}, {"command", command}});
}

void Session::emit_fired_widgets() {
    actions::WidgetBoard preview = state_.widgets();
    for (const auto& fired : preview.tick(batch_now_)) {
        emit(EventKind::kWidgetFired, {{"widget", fired.id.str()},
                                       {"proxy", fired.proxy.str()},
                                       {"expired_at_ms", fired.expired_at_ms}});
    }
}

std::vector<SessionEvent> Session::end_batch() {
    flush();
    return {log_.begin() + static_cast<std::ptrdiff_t>(batch_start_), log_.end()};
}

void Session::flush() {
    while (flushed_ < log_.size()) {
        const SessionEvent& event = log_[flushed_++];
        if (listener_) listener_(event);
    }
}

void Session::ensure_open() const {
    if (finished_) throw Error(ErrorCode::kState, "session has finished");
}

bool Session::frames_remaining() const { return next_frame_ < deps_.scene->frame_count(); }

std::vector<SessionEvent> Session::step() {
    ensure_open();
    if (!frames_remaining()) throw Error(ErrorCode::kPrecondition, "no frames left in the scene");
    begin_batch();
    drain_completions();

    const std::size_t index = next_frame_++;
    const SceneFrame& frame = deps_.scene->frames[index];
    StepTiming timing;
    timing.frame = index;

    detection::DetectResult detected;
    bool ran_detector = index % static_cast<std::size_t>(config_.detect_every) == 0;
    std::optional<Error> detector_error;
    if (ran_detector) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            detected = deps_.detector->detect(frame.color, index);
        } catch (const Error& e) {
            detector_error = e;
            ran_detector = false;
        }
        timing.detect_ms = elapsed_ms(t0);
    }

    const auto t0 = std::chrono::steady_clock::now();
    const auto result = detection::apply_policy(detected.detections, config_.policy);
    json kept = json::array();
    json suppressed = json::array();
    json clipped = json::array();
    json no_depth = json::array();
    std::vector<std::pair<const detection::Detection*, geometry::WorldPoint>> located;
    for (const auto& d : result.kept) {
        kept.push_back(detection_json(d));
        std::optional<geometry::WorldPoint> pos;
        std::string why = "no valid depth";
        try {
            pos = anchoring::localize(d, frame.depth, deps_.scene->intrinsics, frame.pose,
                                      config_.depth_window);
        } catch (const Error& e) {
            why = e.what();
        }
        if (pos) {
            located.emplace_back(&d, *pos);
        } else {
            no_depth.push_back({{"label", d.label}, {"bbox", codec::rect(d.bbox)}, {"reason", why}});
        }
    }
    for (const auto& s : result.suppressed) {
        json j = detection_json(s.detection);
        j["reason"] = detection::to_string(s.reason);
        suppressed.push_back(std::move(j));
    }
    for (const auto& note : detected.clipped) {
        clipped.push_back({{"label", note.label},
                           {"original", codec::rect(note.original)},
                           {"clipped", codec::rect(note.clipped)},
                           {"reason", note.reason}});
    }
    emit(EventKind::kFrameProcessed, {{"frame", index},
                                      {"detected", ran_detector},
                                      {"kept", kept},
                                      {"suppressed", suppressed},
                                      {"clipped", clipped},
                                      {"no_depth", no_depth}});
    if (detector_error) {
        emit_error(detector_error->code(), std::string("detector: ") + detector_error->what(), nullptr);
    }

    for (const auto& [det, pos] : located) {
        const CropRef crop{index, det->bbox};
        const auto plan = state_.registry().plan_upsert(det->label, pos, crop);
        if (plan.spawn) {
            emit(EventKind::kProxySpawned, {{"proxy", plan.id.str()},
                                            {"label", det->label},
                                            {"world_pos", codec::point(pos)},
                                            {"crop", codec::crop_ref(crop)},
                                            {"frame", index}});
        } else {
            json payload{{"proxy", plan.id.str()}, {"frame", index}};
            if (plan.replace_crop) payload["crop"] = codec::crop_ref(crop);
            emit(EventKind::kProxyUpdated, std::move(payload));
        }
    }
    stale_gc(index);
    timing.core_ms = elapsed_ms(t0);
    timings_.push_back(timing);
    return end_batch();
}

void Session::stale_gc(std::size_t frame) {
    if (!config_.stale_after_frames) return;
    std::set<ProxyId> anchored;
    for (const auto& [id, w] : state_.widgets().widgets()) anchored.insert(w.proxy);
    std::vector<ProxyId> stale;
    for (const auto& [id, p] : state_.registry().proxies()) {
        if (p.state.kind == ProxyState::Kind::kBubble && !p.marked && !anchored.count(id) &&
            p.last_seen + *config_.stale_after_frames < frame) {
            stale.push_back(id);
        }
    }
    for (const auto id : stale) emit(EventKind::kProxyRemoved, {{"proxy", id.str()}, {"reason", "stale"}});
}

std::vector<SessionEvent> Session::handle_json(const json& command) {
    ensure_open();
    Command parsed;
    try {
        parsed = parse_command(command);
    } catch (const Error& e) {
        begin_batch();
        emit_error(e.code(), e.what(), command);
        return end_batch();
    }
    return run_command(parsed, command);
}

std::vector<SessionEvent> Session::handle(const Command& command) {
    return run_command(command, to_json(command));
}

std::vector<SessionEvent> Session::run_command(const Command& c, const json& raw) {
    ensure_open();
    begin_batch();
    drain_completions();
    switch (c.type) {
        case Command::Type::kSelect: do_select(c, raw); break;
        case Command::Type::kDismiss: do_dismiss(c, raw); break;
        case Command::Type::kDispatch: do_dispatch(c.proxy, c.action, c.args, raw); break;
        case Command::Type::kAsk:
            do_dispatch(c.proxy, ActionId::kAsk, json{{"question", c.text}}, raw);
            break;
        case Command::Type::kCompare: {
            auto plan = plan_compare_or_error(c.proxies, c.text, raw);
            if (plan) launch_compare(std::move(*plan), std::nullopt);
            break;
        }
    }
    drain_completions();
    return end_batch();
}

bool Session::check_or_error(ProxyId id, const ProxyState& to, const json& raw) {
    if (!state_.registry().contains(id)) {
        emit_error(ErrorCode::kNotFound, "unknown proxy " + id.str(), raw);
        return false;
    }
    try {
        state_.registry().check_transition(id, to);
    } catch (const Error& e) {
        emit_error(e.code(), e.what(), raw);
        return false;
    }
    return true;
}

void Session::emit_transition(ProxyId id, const ProxyState& to) {
    const ProxyState from = state_.registry().get(id).state;
    emit(EventKind::kStateChanged,
         {{"proxy", id.str()}, {"from", anchoring::to_string(from)}, {"to", anchoring::to_string(to)}});
}

void Session::do_select(const Command& c, const json& raw) {
    if (!check_or_error(c.proxy, ProxyState::menu_open(), raw)) return;
    const auto& proxy = state_.registry().get(c.proxy);
    if (!proxy.conversation) {
        emit(EventKind::kConversationOpened,
             {{"conversation", conversation::conversation_id_for(c.proxy)},
              {"proxy", c.proxy.str()},
              {"context_crop", codec::crop_ref(proxy.crop)}});
    }
    emit_transition(c.proxy, ProxyState::menu_open());
}

void Session::do_dismiss(const Command& c, const json& raw) {
    if (!check_or_error(c.proxy, ProxyState::bubble(), raw)) return;
    emit_transition(c.proxy, ProxyState::bubble());
}

void Session::do_dispatch(ProxyId id, ActionId action, const json& args, const json& raw) {
    if (!check_or_error(id, ProxyState::action_active(action), raw)) return;
    json resolved = args.is_null() ? json::object() : args;
    std::optional<comparer::ComparerPlan> plan;
    std::optional<actions::SharePayload> share;
    try {
        actions::validate_args(action, resolved);
        const auto& proxy = state_.registry().get(id);
        if (action == ActionId::kCountdown && resolved.contains("from_reply_of")) {
            const auto source = ProxyId::parse(resolved.at("from_reply_of").get<std::string>());
            const auto* other = state_.registry().find(*source);
            if (!other) throw Error(ErrorCode::kValidation, "countdown: unknown proxy " + source->str());
            std::optional<std::string> reply;
            if (other->conversation) reply = state_.conversations().get(*other->conversation).last_reply();
            if (!reply) {
                throw Error(ErrorCode::kValidation, "countdown: " + source->str() + " has no reply yet");
            }
            resolved.erase("from_reply_of");
            resolved["duration_s"] = actions::parse_duration_seconds(*reply);
        }
        if (action == ActionId::kSendToContact) {
            share = actions::make_share(proxy, resolved.at("recipient").get<std::string>(),
                                        resolved.value("message", std::string()), batch_now_);
        }
    } catch (const Error& e) {
        emit_error(e.code(), e.what(), raw);
        return;
    }
    if (action == ActionId::kCompare) {
        std::vector<ProxyId> ids{id};
        for (const auto& other : resolved.at("with")) ids.push_back(*ProxyId::parse(other.get<std::string>()));
        plan = plan_compare_or_error(ids, resolved.at("prompt").get<std::string>(), raw);
        if (!plan) return;
    }

    emit_transition(id, ProxyState::action_active(action));
    switch (action) {
        case ActionId::kInfo:
            start_conversation_query(id, action, {});
            return;
        case ActionId::kAsk:
            start_conversation_query(id, action, resolved.at("question").get<std::string>());
            return;
        case ActionId::kCompare:
            launch_compare(std::move(*plan), id);
            return;
        case ActionId::kSendToContact:
            try {
                if (config_.shares_path) actions::JsonlFile(*config_.shares_path).append(actions::to_json(*share));
                emit(EventKind::kShared, {{"share", actions::to_json(*share)}});
            } catch (const Error& e) {
                emit_error(e.code(), e.what(), raw);
            }
            break;
        case ActionId::kAddToShoppingList: {
            const actions::ShoppingEntry entry{actions::snapshot_of(state_.registry().get(id)), batch_now_};
            try {
                if (config_.shopping_path) actions::JsonlFile(*config_.shopping_path).append(actions::to_json(entry));
                emit(EventKind::kShoppingListAdded, {{"entry", actions::to_json(entry)}});
            } catch (const Error& e) {
                emit_error(e.code(), e.what(), raw);
            }
            break;
        }
        case ActionId::kNote:
        case ActionId::kTimer:
        case ActionId::kCountdown: {
            const actions::Widget widget{state_.widgets().next_id(), id, batch_now_,
                                         actions::make_widget_kind(action, resolved, batch_now_)};
            emit(EventKind::kWidgetCreated, {{"widget", actions::to_json(widget)}});
            break;
        }
    }
    end_action(id);
}

void Session::end_action(ProxyId id) { emit_transition(id, ProxyState::menu_open()); }

void Session::start_conversation_query(ProxyId id, ActionId action, const std::string& question) {
    const auto& proxy = state_.registry().get(id);
    const std::string conv_id = *proxy.conversation;
    const auto& conv = state_.conversations().get(conv_id);
    std::shared_ptr<const mllm::MllmRequest> request;
    CropRef crop_ref;
    try {
        const CropImage crop = crop_pixels(proxy.crop);
        crop_ref = crop.ref();
        request = std::make_shared<const mllm::MllmRequest>(
            action == ActionId::kInfo
                ? conversation::build_summary_request(conv, crop, proxy.label, config_.policy)
                : conversation::build_ask_request(conv, question, crop, proxy.label, config_.policy));
    } catch (const Error& e) {
        emit_error(e.code(), e.what(), nullptr);
        end_action(id);
        return;
    }
    emit(EventKind::kMllmRequested, {{"conversation", conv_id},
                                     {"proxy", id.str()},
                                     {"purpose", to_string(action)},
                                     {"prompt", request->prompt()},
                                     {"images", crop_list({crop_ref})},
                                     {"labels", request->labels()},
                                     {"fingerprint", mllm::fingerprint(*request)}});

    run_job([this, request, conv_id, id, action]() -> std::function<void()> {
        std::optional<mllm::MllmReply> reply;
        std::optional<Error> failure;
        try {
            reply = deps_.client->query(*request);
        } catch (const Error& e) {
            failure = e;
        }
        return [this, reply, failure, conv_id, id, action] {
            emit_reply(conv_id, reply, failure);
            if (reply && action == ActionId::kInfo) {
                if (const auto refined = conversation::refined_label_from_summary(reply->text)) {
                    emit(EventKind::kProxyUpdated, {{"proxy", id.str()}, {"refined_label", *refined}});
                }
            }
            end_action(id);
        };
    });
}

void Session::emit_reply(const std::string& conv_id, const std::optional<mllm::MllmReply>& reply,
                         const std::optional<Error>& failure) {
    if (reply) {
        emit(EventKind::kMllmReplied, {{"conversation", conv_id},
                                       {"ok", true},
                                       {"text", reply->text},
                                       {"display", conversation::truncate_words(reply->text)},
                                       {"latency_ms", reply->latency_ms},
                                       {"backend", reply->backend}});
    } else {
        emit(EventKind::kMllmReplied, {{"conversation", conv_id},
                                       {"ok", false},
                                       {"code", failure ? to_string(failure->code()) : "unknown"},
                                       {"error", failure ? failure->what() : "unknown failure"}});
    }
}

std::optional<comparer::ComparerPlan> Session::plan_compare_or_error(const std::vector<ProxyId>& ids,
                                                                     const std::string& prompt,
                                                                     const json& raw) {
    if (comparer_busy_) {
        emit_error(ErrorCode::kState, "compare: a comparer job is already running", raw);
        return std::nullopt;
    }
    if (!state_.current_frame()) {
        emit_error(ErrorCode::kPrecondition, "compare: no frame processed yet", raw);
        return std::nullopt;
    }
    for (const auto id : ids) {
        if (!state_.registry().contains(id)) {
            emit_error(ErrorCode::kNotFound, "unknown proxy " + id.str(), raw);
            return std::nullopt;
        }
    }
    try {
        auto plan = comparer::plan_compare(
            state_.registry(), ids, prompt, current_pose(), deps_.scene->intrinsics,
            [this](const anchoring::ObjectProxy& p) { return crop_pixels(p.crop); });
        // Denylisted labels are rejected here, before anything is logged.
        mllm::MllmRequest::create(comparer_job_id(state_.next_comparer_job()), {}, {{plan.labels, plan.stitched.pixels}}, plan.user_prompt,
                                  config_.policy);
        return plan;
    } catch (const Error& e) {
        emit_error(e.code(), e.what(), raw);
        return std::nullopt;
    }
}

void Session::launch_compare(comparer::ComparerPlan plan_value, std::optional<ProxyId> via) {
    auto plan = std::make_shared<const comparer::ComparerPlan>(std::move(plan_value));
    const std::string job = comparer_job_id(state_.next_comparer_job());
    std::vector<CropRef> sources;
    for (const auto id : plan->ordered) sources.push_back(state_.registry().get(id).crop);

    emit(EventKind::kConversationOpened, {{"conversation", job},
                                          {"proxy", nullptr},
                                          {"context_crop", codec::crop_ref(plan->stitched.ref())}});
    auto request_payload = [this, plan, job, sources](const std::string& prompt, const std::vector<mllm::Turn>& history) {
        const auto request = mllm::MllmRequest::create(job, history, {{plan->labels, plan->stitched.pixels}},
                                                       prompt, config_.policy);
        return json{{"conversation", job},
                    {"proxy", nullptr},
                    {"purpose", "compare"},
                    {"prompt", prompt},
                    {"images", crop_list(sources)},
                    {"labels", request.labels()},
                    {"fingerprint", mllm::fingerprint(request)}};
    };
    emit(EventKind::kMllmRequested, request_payload(plan->user_prompt, {}));
    comparer_busy_ = true;

    run_job([this, plan, job, via, request_payload]() -> std::function<void()> {
        auto outcome = std::make_shared<const comparer::ComparerOutcome>(
            comparer::run_compare_queries(*plan, job, *deps_.client, config_.policy));
        return [this, plan, job, via, outcome, request_payload] {
            for (std::size_t k = 0; k < outcome->exchanges.size(); ++k) {
                const auto& ex = outcome->exchanges[k];
                if (k > 0) emit(EventKind::kMllmRequested, request_payload(ex.prompt, ex.history));
                std::optional<Error> failure;
                if (!ex.reply) failure = Error(ErrorCode::kActionFailed, ex.error);
                emit_reply(job, ex.reply, failure);
            }
            if (outcome->indices && !outcome->error) {
                emit(EventKind::kMarksChanged,
                     {{"marked", id_list(comparer::indices_to_proxies(plan->ordered, *outcome->indices))}});
            }
            emit(EventKind::kComparerCompleted,
                 {{"job", job},
                  {"conversation", job},
                  {"proxies", id_list(plan->ordered)},
                  {"prompt", plan->user_prompt},
                  {"answer", outcome->answer},
                  {"indices", outcome->indices ? json(*outcome->indices) : json(nullptr)},
                  {"error", outcome->error ? json(*outcome->error) : json(nullptr)}});
            comparer_busy_ = false;
            if (via) end_action(*via);
        };
    });
}

void Session::run_job(std::function<std::function<void()>()> job) {
    {
        std::lock_guard lock(completions_mutex_);
        ++jobs_in_flight_;
    }
    deps_.executor->submit([this, job = std::move(job)] {
        std::function<void()> completion;
        try {
            completion = job();
        } catch (const std::exception& e) {
            const std::string what = e.what();
            completion = [this, what] { emit_error(ErrorCode::kActionFailed, what, nullptr); };
        }
        std::function<void()> notify;
        {
            std::lock_guard lock(completions_mutex_);
            completions_.push_back(std::move(completion));
            notify = notify_;
        }
        if (notify) notify();
        std::lock_guard lock(completions_mutex_);
        --jobs_in_flight_;
        jobs_cv_.notify_all();
    });
}

void Session::drain_completions() {
    for (;;) {
        std::function<void()> completion;
        {
            std::lock_guard lock(completions_mutex_);
            if (completions_.empty()) return;
            completion = std::move(completions_.front());
            completions_.pop_front();
        }
        completion();
    }
}

void Session::set_completion_notifier(std::function<void()> notify) {
    std::lock_guard lock(completions_mutex_);
    notify_ = std::move(notify);
}

bool Session::has_pending_jobs() const {
    std::lock_guard lock(completions_mutex_);
    return jobs_in_flight_ > 0 || !completions_.empty();
}

void Session::wait_for_jobs() {
    std::unique_lock lock(completions_mutex_);
    jobs_cv_.wait(lock, [this] { return jobs_in_flight_ == 0; });
}

std::vector<SessionEvent> Session::advance(std::int64_t ms) {
    ensure_open();
    auto* clock = dynamic_cast<VirtualClock*>(deps_.clock.get());
    if (!clock) throw Error(ErrorCode::kClock, "advance needs the virtual clock");
    if (ms < 0) throw Error(ErrorCode::kClock, "advance by a negative amount");
    clock->advance(ms);
    begin_batch();
    drain_completions();
    emit(EventKind::kClockAdvanced, {{"now_ms", batch_now_}});
    return end_batch();
}

std::vector<SessionEvent> Session::poll() {
    if (finished_) return {};
    begin_batch();
    drain_completions();
    return end_batch();
}

const geometry::Pose& Session::current_pose() const {
    return deps_.scene->frames.at(state_.current_frame().value()).pose;
}

CropImage Session::crop_pixels(const CropRef& ref) const {
    if (ref.frame_index >= deps_.scene->frame_count()) {
        throw Error(ErrorCode::kNotFound, "crop refers to a missing frame");
    }
    return crop(deps_.scene->frames[ref.frame_index].color, ref.bbox, ref.frame_index);
}

json Session::snapshot() const {
    json view_proxies = json::array();
    json view_frame = nullptr;
    if (state_.current_frame()) {
        view_frame = *state_.current_frame();
        const auto& k = deps_.scene->intrinsics;
        for (const auto& [id, p] : state_.registry().proxies()) {
            const auto px = geometry::project(p.world_pos, current_pose(), k);
            json entry{{"id", id.str()}};
            entry["screen"] = px ? json::array({px->x(), px->y()}) : json(nullptr);
            entry["in_frame"] = px && k.contains(*px);
            view_proxies.push_back(std::move(entry));
        }
    }
    return {{"seq", state_.last_seq()},
            {"state", state_.to_json()},
            {"view", {{"frame", view_frame}, {"proxies", view_proxies}}},
            {"pending_jobs", has_pending_jobs()}};
}

}  // namespace aor::service
