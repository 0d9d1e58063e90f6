// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

// Wiring used by the `aor` command: backend selection, output layout and the
// headless and served run loops.

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aor/detection.hpp"
#include "aor/mllm_client.hpp"
#include "aor/service/session.hpp"
#include "aor/service/state.hpp"

namespace aor::service {

struct RunOptions {
    std::filesystem::path scene;
    std::string detector{"scripted"};  // scripted | http:<url>
    std::string mllm{"mock"};          // mock[:<rules.json>] | replay:<store> | live:<url>
    std::string mllm_token;
    std::optional<std::string> serve;  // host:port
    double serve_seconds{0};           // 0 = until keep_running() says stop
    std::optional<std::filesystem::path> record;
    std::optional<std::filesystem::path> trace;
    std::string clock{"auto"};         // auto | virtual | wall
    std::filesystem::path out{"."};
    double cadence_hz{30};
    SessionConfig session;
};

/// Files a run writes under `out`.
struct OutputLayout {
    std::filesystem::path events;    // state/session-<id>.events.jsonl
    std::filesystem::path final_state;  // state/session-<id>.final.json
    std::filesystem::path timings;   // state/session-<id>.timings.jsonl
    std::filesystem::path audit;     // state/mllm-audit.jsonl
    std::filesystem::path shopping;  // state/shopping.jsonl
    std::filesystem::path shares;    // outbox/shares.jsonl

    static OutputLayout under(const std::filesystem::path& out, const std::string& session_id);
    void create_directories() const;
};

struct Percentiles {
    double p50{0};
    double p95{0};
};

/// Nearest-rank percentiles. Throws kPrecondition on an empty sample.
Percentiles percentiles(std::vector<double> samples);

struct RunSummary {
    OutputLayout files;
    std::size_t frames{0};
    std::size_t events{0};
    std::size_t proxies{0};
    std::size_t errors{0};
    Percentiles core_ms;
    std::string listening;  // host:port in serve mode
};

std::shared_ptr<detection::DetectorBackend> make_detector(const std::string& spec,
                                                          std::shared_ptr<const SceneDirectory> scene);
std::shared_ptr<mllm::Backend> make_mllm_backend(const std::string& spec, const std::string& token);

/// Deterministic run: virtual clock, inline jobs, optional trace.
RunSummary run_headless(const RunOptions& options);

/// Serves viewers until `keep_running` returns false (or serve_seconds
/// elapse). `on_listening` receives the bound address.
RunSummary run_served(const RunOptions& options, const std::function<bool()>& keep_running,
                      const std::function<void(const std::string&)>& on_listening = {});

/// Pretty JSON of the folded state plus a trailing newline; run and replay
/// both write this form.
std::string render_state(const SessionState& state);

SessionState replay_log(const std::filesystem::path& log);

}  // namespace aor::service
