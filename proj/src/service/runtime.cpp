// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include "aor/service/runtime.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include "aor/error.hpp"
#include "aor/service/host.hpp"
#include "aor/service/server.hpp"
#include "aor/service/trace.hpp"

namespace aor::service {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool starts_with(const std::string& s, std::string_view prefix) { return s.rfind(prefix, 0) == 0; }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

void write_timings(const fs::path& path, const std::vector<StepTiming>& timings) {
    std::string text;
    for (const auto& t : timings) {
        text += json{{"frame", t.frame}, {"detect_ms", t.detect_ms}, {"core_ms", t.core_ms}}.dump() + "\n";
    }
    write_text(path, text);
}

struct Wiring {
    OutputLayout files;
    std::shared_ptr<const SceneDirectory> scene;
    SessionConfig config;
    SessionDeps deps;
};

Wiring wire(const RunOptions& options, std::shared_ptr<Clock> clock, std::shared_ptr<JobExecutor> executor) {
    Wiring w;
    w.files = OutputLayout::under(options.out, options.session.session_id);
    w.files.create_directories();
    w.scene = load_shared_scene(options.scene);
    w.config = options.session;
    w.config.shares_path = w.files.shares;
    w.config.shopping_path = w.files.shopping;
    auto backend = make_mllm_backend(options.mllm, options.mllm_token);
    if (options.record) backend = std::make_shared<mllm::RecordingBackend>(backend, *options.record);
    w.deps.scene = w.scene;
    w.deps.detector = make_detector(options.detector, w.scene);
    w.deps.client = std::make_shared<mllm::Client>(backend, std::make_shared<mllm::AuditLog>(w.files.audit));
    w.deps.clock = std::move(clock);
    w.deps.executor = std::move(executor);
    return w;
}

RunSummary summarize(const Wiring& w, const Session& session) {
    RunSummary s;
    s.files = w.files;
    s.frames = session.state().frames_processed();
    s.events = session.log().size();
    s.proxies = session.state().registry().size();
    s.errors = session.state().errors().size();
    std::vector<double> core;
    for (const auto& t : session.timings()) core.push_back(t.core_ms);
    if (!core.empty()) s.core_ms = percentiles(core);
    return s;
}

}  // namespace

OutputLayout OutputLayout::under(const fs::path& out, const std::string& session_id) {
    const fs::path state = out / "state";
    return {state / ("session-" + session_id + ".events.jsonl"),
            state / ("session-" + session_id + ".final.json"),
            state / ("session-" + session_id + ".timings.jsonl"),
            state / "mllm-audit.jsonl",
            state / "shopping.jsonl",
            out / "outbox" / "shares.jsonl"};
}

void OutputLayout::create_directories() const {
    std::error_code ec;
    fs::create_directories(events.parent_path(), ec);
    if (!ec) fs::create_directories(shares.parent_path(), ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create output directories: " + ec.message());
}

Percentiles percentiles(std::vector<double> samples) {
    if (samples.empty()) throw Error(ErrorCode::kPrecondition, "percentiles of an empty sample");
    std::sort(samples.begin(), samples.end());
    auto rank = [&](double q) {
        const auto n = static_cast<double>(samples.size());
        const auto k = static_cast<std::size_t>(std::max(1.0, std::ceil(q * n)));
        return samples[k - 1];
    };
    return {rank(0.50), rank(0.95)};
}

std::shared_ptr<detection::DetectorBackend> make_detector(const std::string& spec,
                                                          std::shared_ptr<const SceneDirectory> scene) {
    if (spec == "scripted") {
        if (!scene->has_ground_truth) {
            throw Error(ErrorCode::kValidation, "scripted detector needs detections.jsonl in the scene");
        }
        return std::make_shared<detection::ScriptedDetector>(std::move(scene));
    }
    if (starts_with(spec, "http:")) return std::make_shared<detection::HttpDetector>(spec.substr(5));
    throw Error(ErrorCode::kValidation, "detector must be 'scripted' or 'http:<url>'");
}

std::shared_ptr<mllm::Backend> make_mllm_backend(const std::string& spec, const std::string& token) {
    if (spec == "mock") return std::make_shared<mllm::MockBackend>();
    if (starts_with(spec, "mock:")) {
        return std::make_shared<mllm::MockBackend>(mllm::MockBackend::from_file(spec.substr(5)));
    }
    if (starts_with(spec, "replay:")) {
        return std::make_shared<mllm::ReplayBackend>(
            std::make_shared<const mllm::ReplayStore>(mllm::ReplayStore::load(spec.substr(7))));
    }
    if (starts_with(spec, "live:")) return std::make_shared<mllm::LiveBackend>(spec.substr(5), token);
    throw Error(ErrorCode::kValidation, "mllm must be mock[:<rules>], replay:<store> or live:<url>");
}

RunSummary run_headless(const RunOptions& options) {
    if (options.clock == "wall") throw Error(ErrorCode::kValidation, "headless runs use the virtual clock");
    const auto period = frame_period_ms(options.cadence_hz);
    std::vector<TraceEntry> trace;
    if (options.trace) trace = load_trace(*options.trace);

    auto clock = std::make_shared<VirtualClock>();
    Wiring w = wire(options, clock, std::make_shared<InlineExecutor>());
    EventLogWriter writer(w.files.events);
    Session session(w.config, w.deps, [&writer](const SessionEvent& e) { writer.append(e); });
    if (options.trace) {
        run_trace(session, *clock, trace, period);
    } else {
        run_all_frames(session, *clock, period);
    }
    session.finish();
    write_text(w.files.final_state, render_state(session.state()));
    write_timings(w.files.timings, session.timings());
    return summarize(w, session);
}

RunSummary run_served(const RunOptions& options, const std::function<bool()>& keep_running,
                      const std::function<void(const std::string&)>& on_listening) {
    if (!options.serve) throw Error(ErrorCode::kValidation, "run_served needs a serve address");
    if (options.trace) throw Error(ErrorCode::kValidation, "--trace is for headless runs");
    if (options.clock == "virtual") throw Error(ErrorCode::kValidation, "serve mode uses the wall clock");
    const auto period = frame_period_ms(options.cadence_hz);

    Wiring w = wire(options, std::make_shared<WallClock>(), std::make_shared<ThreadExecutor>());
    auto writer = std::make_shared<EventLogWriter>(w.files.events);
    const Session* session_view = nullptr;
    SessionHost host(
        [&](Session::Listener fan_out) {
            auto session = std::make_unique<Session>(w.config, w.deps, [writer, fan_out](const SessionEvent& e) {
                writer->append(e);
                fan_out(e);
            });
            session_view = session.get();
            return session;
        },
        period);
    ViewerServer server(host, *options.serve);
    server.start();
    host.start();
    const auto [bind_host, requested] = parse_listen_address(*options.serve);
    const std::string listening = bind_host + ":" + std::to_string(server.port());
    if (on_listening) on_listening(listening);

    const auto start = std::chrono::steady_clock::now();
    while (keep_running()) {
        if (options.serve_seconds > 0 &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >=
                options.serve_seconds) {
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    server.stop();
    host.stop();
    const Session& session = *session_view;
    write_text(w.files.final_state, render_state(session.state()));
    write_timings(w.files.timings, session.timings());
    RunSummary summary = summarize(w, session);
    summary.listening = listening;
    return summary;
}

std::string render_state(const SessionState& state) { return state.to_json().dump(2) + "\n"; }

SessionState replay_log(const fs::path& log) {
    return SessionState::fold(read_event_log(log));
}

}  // namespace aor::service
