// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

// Serve mode: a thread that owns the session, feeds it frames at the
// configured cadence, runs queued commands and fans events out to viewers.

#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "aor/service/session.hpp"

namespace aor::service {

inline constexpr std::string_view kProtocolName = "aor-viewer/1";

/// Viewer protocol messages: {"type", "seq"?, "payload"} as compact JSON.
std::string hello_message(const Session& session);
std::string snapshot_message(const Session& session);
std::string event_message(const SessionEvent& event);
std::string error_message(const std::string& code, const std::string& reason);

class SessionHost {
public:
    using Send = std::function<void(std::string message)>;
    using SessionFactory = std::function<std::unique_ptr<Session>(Session::Listener)>;

    /// The factory is called on the host thread's behalf with the listener
    /// that fans events out; `period_ms` is the frame cadence.
    SessionHost(SessionFactory factory, std::int64_t period_ms);
    ~SessionHost();
    SessionHost(const SessionHost&) = delete;
    SessionHost& operator=(const SessionHost&) = delete;

    void start();
    void stop();

    /// Sends hello and a snapshot to `send`, then every later event. All on
    /// the host thread, so nothing can slip between snapshot and events.
    std::uint64_t subscribe(Send send);
    void unsubscribe(std::uint64_t id);

    /// Runs a command; a protocol failure goes back to the subscriber only.
    void post_command(const nlohmann::json& command, std::optional<std::uint64_t> from = std::nullopt);
    void request_snapshot(std::uint64_t subscriber);

    nlohmann::json snapshot();
    /// PNG bytes; throws kNotFound.
    std::vector<std::uint8_t> frame_png(std::size_t index);
    std::vector<std::uint8_t> crop_png(const std::string& proxy_id);

    /// Runs fn on the host thread and waits for it.
    template <typename Fn>
    auto call(Fn fn) -> decltype(fn(std::declval<Session&>()));

    const SceneDirectory& scene() const { return session_->scene(); }
    /// Session events seen so far (host-thread copy for tests).
    std::size_t events_broadcast() const;

private:
    void post(std::function<void()> task);
    void loop();
    void broadcast(const SessionEvent& event);

    std::unique_ptr<Session> session_;
    std::int64_t period_ms_;

    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<std::function<void()>> tasks_;
    bool stopping_{false};
    bool wake_{false};
    std::thread thread_;

    mutable std::mutex subs_mutex_;
    std::map<std::uint64_t, Send> subscribers_;
    std::uint64_t next_subscriber_{1};
    std::size_t events_broadcast_{0};
};

template <typename Fn>
auto SessionHost::call(Fn fn) -> decltype(fn(std::declval<Session&>())) {
    using R = decltype(fn(std::declval<Session&>()));
    auto task = std::make_shared<std::packaged_task<R()>>([this, fn] { return fn(*session_); });
    auto future = task->get_future();
    post([task] { (*task)(); });
    return future.get();
}

}  // namespace aor::service
