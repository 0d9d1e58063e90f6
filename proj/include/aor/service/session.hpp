// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "aor/actions.hpp"
#include "aor/anchoring.hpp"
#include "aor/comparer.hpp"
#include "aor/detection.hpp"
#include "aor/error.hpp"
#include "aor/mllm_client.hpp"
#include "aor/scene_io.hpp"
#include "aor/service/events.hpp"
#include "aor/service/state.hpp"

namespace aor::service {

class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ms() const = 0;
};

/// Moves only when told to. Used for deterministic runs and tests.
class VirtualClock final : public Clock {
public:
    std::int64_t now_ms() const override { return now_ms_; }
    void set(std::int64_t ms);  // throws kClock when moving backwards
    void advance(std::int64_t ms) { set(now_ms_ + ms); }

private:
    std::int64_t now_ms_{0};
};

/// Milliseconds since construction on the steady clock.
class WallClock final : public Clock {
public:
    WallClock() : start_(std::chrono::steady_clock::now()) {}
    std::int64_t now_ms() const override;

private:
    std::chrono::steady_clock::time_point start_;
};

/// Runs background work (MLLM queries). The inline executor runs the job
/// before submit() returns, which keeps headless runs deterministic.
class JobExecutor {
public:
    virtual ~JobExecutor() = default;
    virtual void submit(std::function<void()> job) = 0;
};

class InlineExecutor final : public JobExecutor {
public:
    void submit(std::function<void()> job) override { job(); }
};

/// One thread per job; the destructor joins them all.
class ThreadExecutor final : public JobExecutor {
public:
    ~ThreadExecutor() override;
    void submit(std::function<void()> job) override;

private:
    std::mutex mutex_;
    std::vector<std::thread> threads_;
};

struct Command {
    enum class Type { kSelect, kDismiss, kDispatch, kAsk, kCompare };

    Type type{Type::kSelect};
    anchoring::ProxyId proxy;                  // select, dismiss, dispatch, ask
    ActionId action{ActionId::kInfo};          // dispatch
    nlohmann::json args = nlohmann::json::object();  // dispatch
    std::string text;                          // ask question / compare prompt
    std::vector<anchoring::ProxyId> proxies;   // compare
};

/// Parses the command JSON of the viewer protocol and trace files.
/// Throws Error(kProtocol).
Command parse_command(const nlohmann::json& j);
nlohmann::json to_json(const Command& command);

struct SessionConfig {
    std::string session_id{"0001"};
    detection::FilterPolicy policy;
    double dedup_radius{anchoring::kDefaultDedupRadius};
    int depth_window{geometry::kDefaultDepthWindow};
    /// Run the detector on every n-th frame; other frames only advance time.
    int detect_every{1};
    /// Bubble proxies unseen for this many frames are dropped.
    std::optional<std::size_t> stale_after_frames;
    /// Outbox and shopping list files; unset keeps them in memory only.
    std::optional<std::filesystem::path> shares_path;
    std::optional<std::filesystem::path> shopping_path;

    /// Throws kValidation.
    void validate() const;
};

struct SessionDeps {
    std::shared_ptr<const SceneDirectory> scene;
    std::shared_ptr<detection::DetectorBackend> detector;
    std::shared_ptr<mllm::Client> client;
    std::shared_ptr<Clock> clock;
    std::shared_ptr<JobExecutor> executor;
};

/// Wall time of the parts of a step that run on the session thread,
/// excluding the detector call and log I/O.
struct StepTiming {
    std::size_t frame{0};
    double detect_ms{0};
    double core_ms{0};
};

/// The single-threaded session core. Every state change is an event that is
/// first applied to the state fold and then handed to the listener.
/// Not thread-safe: one thread drives it (see SessionHost).
class Session {
public:
    using Listener = std::function<void(const SessionEvent&)>;

    Session(SessionConfig config, SessionDeps deps, Listener listener = {});
    ~Session();
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    /// Processes the next recorded frame.
    std::vector<SessionEvent> step();
    bool frames_remaining() const;
    std::size_t next_frame() const { return next_frame_; }

    /// Commands never throw for bad input; they emit an Error event. They do
    /// throw kState once the session has finished.
    std::vector<SessionEvent> handle(const Command& command);
    std::vector<SessionEvent> handle_json(const nlohmann::json& command);

    /// Explicit clock advance from a trace; emits ClockAdvanced.
    std::vector<SessionEvent> advance(std::int64_t ms);
    /// Brings widgets up to the clock and folds in finished background jobs.
    std::vector<SessionEvent> poll();

    /// Called from worker threads when a job completes.
    void set_completion_notifier(std::function<void()> notify);
    bool has_pending_jobs() const;
    /// Blocks until no background job is running (completions may still be queued).
    void wait_for_jobs();

    void finish() { finished_ = true; }
    bool finished() const { return finished_; }

    const SessionState& state() const { return state_; }
    const std::vector<SessionEvent>& log() const { return log_; }
    const std::vector<StepTiming>& timings() const { return timings_; }
    const SessionConfig& config() const { return config_; }
    const SceneDirectory& scene() const { return *deps_.scene; }

    /// State plus a view: every proxy projected with the current frame pose.
    nlohmann::json snapshot() const;

    CropImage crop_pixels(const CropRef& ref) const;

private:
    void begin_batch();
    std::vector<SessionEvent> end_batch();
    void ensure_open() const;
    void emit(EventKind kind, nlohmann::json payload);
    void emit_error(ErrorCode code, const std::string& reason, const nlohmann::json& command);
    void emit_fired_widgets();
    void emit_transition(anchoring::ProxyId id, const anchoring::ProxyState& to);
    void emit_reply(const std::string& conv_id, const std::optional<mllm::MllmReply>& reply,
                    const std::optional<Error>& failure);
    void flush();

    std::vector<SessionEvent> run_command(const Command& c, const nlohmann::json& raw);
    bool check_or_error(anchoring::ProxyId id, const anchoring::ProxyState& to,
                        const nlohmann::json& raw);
    void do_select(const Command& c, const nlohmann::json& raw);
    void do_dismiss(const Command& c, const nlohmann::json& raw);
    void do_dispatch(anchoring::ProxyId id, ActionId action, const nlohmann::json& args,
                     const nlohmann::json& raw);
    std::optional<comparer::ComparerPlan> plan_compare_or_error(
        const std::vector<anchoring::ProxyId>& ids, const std::string& prompt,
        const nlohmann::json& raw);
    void launch_compare(comparer::ComparerPlan plan, std::optional<anchoring::ProxyId> via);
    void start_conversation_query(anchoring::ProxyId id, ActionId action,
                                  const std::string& question);
    void end_action(anchoring::ProxyId id);
    void stale_gc(std::size_t frame);
    const geometry::Pose& current_pose() const;

    /// The job runs on the executor and returns a completion that is later
    /// run on the session thread.
    void run_job(std::function<std::function<void()>()> job);
    void drain_completions();

    SessionConfig config_;
    SessionDeps deps_;
    Listener listener_;
    SessionState state_;
    std::vector<SessionEvent> log_;
    std::size_t batch_start_{0};
    std::int64_t batch_now_{0};
    std::size_t flushed_{0};
    std::size_t next_frame_{0};
    bool finished_{false};
    bool comparer_busy_{false};
    std::vector<StepTiming> timings_;

    mutable std::mutex completions_mutex_;
    std::condition_variable jobs_cv_;
    std::deque<std::function<void()>> completions_;
    std::size_t jobs_in_flight_{0};
    std::function<void()> notify_;
};

}  // namespace aor::service
