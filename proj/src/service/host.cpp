// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include "aor/service/host.hpp"

#include <chrono>

#include "aor/actions.hpp"
#include "aor/error.hpp"

namespace aor::service {
using nlohmann::json;

std::string hello_message(const Session& session) {
    const auto& scene = session.scene();
    const auto& k = scene.intrinsics;
    json catalog = json::array();
    for (const auto& entry : actions::catalog()) {
        catalog.push_back({{"category", to_string(entry.category)},
                           {"action", to_string(entry.action)},
                           {"title", entry.title}});
    }
    json payload{{"protocol", kProtocolName},
                 {"session_id", session.config().session_id},
                 {"scene", scene.name},
                 {"frame_count", scene.frame_count()},
                 {"intrinsics",
                  {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}}},
                 {"catalog", catalog}};
    return json{{"type", "hello"}, {"payload", payload}}.dump();
}

std::string snapshot_message(const Session& session) {
    return json{{"type", "snapshot"}, {"seq", session.state().last_seq()}, {"payload", session.snapshot()}}
        .dump();
}

std::string event_message(const SessionEvent& event) {
    return json{{"type", "event"}, {"seq", event.seq}, {"payload", to_json(event)}}.dump();
}

std::string error_message(const std::string& code, const std::string& reason) {
    return json{{"type", "error"}, {"payload", {{"code", code}, {"reason", reason}}}}.dump();
}

SessionHost::SessionHost(SessionFactory factory, std::int64_t period_ms) : period_ms_(period_ms) {
    session_ = factory([this](const SessionEvent& e) { broadcast(e); });
    session_->set_completion_notifier([this] {
        std::lock_guard lock(mutex_);
        wake_ = true;
        cv_.notify_all();
    });
}

SessionHost::~SessionHost() {
    stop();
    session_.reset();
}

void SessionHost::start() {
    std::lock_guard lock(mutex_);
    if (thread_.joinable()) return;
    stopping_ = false;
    thread_ = std::thread([this] { loop(); });
}

void SessionHost::stop() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
        cv_.notify_all();
    }
    if (thread_.joinable()) thread_.join();
}

void SessionHost::post(std::function<void()> task) {
    std::lock_guard lock(mutex_);
    if (!thread_.joinable() || stopping_) {
        throw Error(ErrorCode::kState, "session host is not running");
    }
    tasks_.push_back(std::move(task));
    cv_.notify_all();
}

void SessionHost::loop() {
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    for (;;) {
        std::deque<std::function<void()>> tasks;
        {
            std::unique_lock lock(mutex_);
            const auto due = start + std::chrono::milliseconds(
                                         period_ms_ * static_cast<std::int64_t>(session_->next_frame()));
            const auto wake_at = session_->frames_remaining()
                                     ? std::min(due, clock::now() + std::chrono::milliseconds(100))
                                     : clock::now() + std::chrono::milliseconds(100);
            cv_.wait_until(lock, wake_at, [this] { return stopping_ || wake_ || !tasks_.empty(); });
            if (stopping_) break;
            wake_ = false;
            tasks.swap(tasks_);
        }
        for (auto& task : tasks) task();
        try {
            session_->poll();
            const auto due = start + std::chrono::milliseconds(
                                         period_ms_ * static_cast<std::int64_t>(session_->next_frame()));
            if (session_->frames_remaining() && clock::now() >= due) session_->step();
        } catch (const Error& e) {
            std::lock_guard lock(subs_mutex_);
            for (auto& [id, send] : subscribers_) send(error_message(std::string(to_string(e.code())), e.what()));
        }
    }
    std::deque<std::function<void()>> rest;
    {
        std::lock_guard lock(mutex_);
        rest.swap(tasks_);
    }
    for (auto& task : rest) task();
}

void SessionHost::broadcast(const SessionEvent& event) {
    const std::string message = event_message(event);
    std::lock_guard lock(subs_mutex_);
    ++events_broadcast_;
    for (auto& [id, send] : subscribers_) send(message);
}

std::size_t SessionHost::events_broadcast() const {
    std::lock_guard lock(subs_mutex_);
    return events_broadcast_;
}

std::uint64_t SessionHost::subscribe(Send send) {
    return call([this, send](Session& session) {
        send(hello_message(session));
        send(snapshot_message(session));
        std::lock_guard lock(subs_mutex_);
        const auto id = next_subscriber_++;
        subscribers_.emplace(id, send);
        return id;
    });
}

void SessionHost::unsubscribe(std::uint64_t id) {
    std::lock_guard lock(subs_mutex_);
    subscribers_.erase(id);
}

void SessionHost::post_command(const json& command, std::optional<std::uint64_t> from) {
    post([this, command, from] {
        try {
            session_->handle_json(command);
        } catch (const Error& e) {
            if (!from) return;
            std::lock_guard lock(subs_mutex_);
            const auto it = subscribers_.find(*from);
            if (it != subscribers_.end()) it->second(error_message(std::string(to_string(e.code())), e.what()));
        }
    });
}

void SessionHost::request_snapshot(std::uint64_t subscriber) {
    post([this, subscriber] {
        const std::string message = snapshot_message(*session_);
        std::lock_guard lock(subs_mutex_);
        const auto it = subscribers_.find(subscriber);
        if (it != subscribers_.end()) it->second(message);
    });
}

json SessionHost::snapshot() {
    return call([](Session& session) { return session.snapshot(); });
}

std::vector<std::uint8_t> SessionHost::frame_png(std::size_t index) {
    const auto& scene = session_->scene();
    if (index >= scene.frame_count()) throw Error(ErrorCode::kNotFound, "no frame " + std::to_string(index));
    return png::encode_rgb(scene.frames[index].color);
}

std::vector<std::uint8_t> SessionHost::crop_png(const std::string& proxy_id) {
    const auto id = anchoring::ProxyId::parse(proxy_id);
    if (!id) throw Error(ErrorCode::kNotFound, "bad proxy id " + proxy_id);
    const auto ref = call([id](Session& session) -> std::optional<CropRef> {
        const auto* proxy = session.state().registry().find(*id);
        if (!proxy) return std::nullopt;
        return proxy->crop;
    });
    if (!ref) throw Error(ErrorCode::kNotFound, "unknown proxy " + proxy_id);
    return png::encode_rgb(session_->crop_pixels(*ref).pixels);
}

}  // namespace aor::service
