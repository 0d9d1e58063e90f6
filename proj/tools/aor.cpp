// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "aor/error.hpp"
#include "aor/scene_io.hpp"
#include "aor/service/runtime.hpp"

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

void print_summary(const aor::service::RunSummary& s) {
    std::printf("frames=%zu events=%zu proxies=%zu errors=%zu core_ms_p50=%.3f core_ms_p95=%.3f\n", s.frames,
                s.events, s.proxies, s.errors, s.core_ms.p50, s.core_ms.p95);
    std::printf("event log: %s\nfinal state: %s\n", s.files.events.c_str(), s.files.final_state.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"aor: object-anchored assistant runtime"};
    app.require_subcommand(1);

    aor::service::RunOptions run;
    std::vector<std::string> deny;
    std::vector<std::string> allow;
    std::size_t stale_after = 0;
    auto* run_cmd = app.add_subcommand("run", "process a recorded scene, headless or serving viewers");
    run_cmd->add_option("--scene", run.scene, "scene directory")->required()->check(CLI::ExistingDirectory);
    run_cmd->add_option("--detector", run.detector, "scripted | http:<url>")->capture_default_str();
    run_cmd->add_option("--mllm", run.mllm, "mock[:<rules.json>] | replay:<store> | live:<url>")
        ->capture_default_str();
    run_cmd->add_option("--serve", run.serve, "host:port for the viewer endpoint");
    run_cmd->add_option("--serve-seconds", run.serve_seconds, "stop serving after this long (0 = until signal)");
    run_cmd->add_option("--record", run.record, "append every new MLLM exchange to this replay store");
    run_cmd->add_option("--dedup-radius", run.session.dedup_radius, "meters")->capture_default_str();
    run_cmd->add_option("--min-confidence", run.session.policy.min_confidence)->capture_default_str();
    run_cmd->add_option("--deny", deny, "denylisted label (repeatable; replaces the default 'person')");
    run_cmd->add_option("--allow", allow, "allowlisted label (repeatable)");
    run_cmd->add_option("--depth-window", run.session.depth_window, "1, 3, 5 or 7")->capture_default_str();
    run_cmd->add_option("--detect-every", run.session.detect_every, "run the detector every n frames")
        ->capture_default_str();
    run_cmd->add_option("--stale-after", stale_after, "drop idle bubbles unseen for n frames (0 = never)");
    run_cmd->add_option("--trace", run.trace, "scripted interaction trace (headless only)")
        ->check(CLI::ExistingFile);
    run_cmd->add_option("--clock", run.clock, "auto | virtual | wall")
        ->check(CLI::IsMember({"auto", "virtual", "wall"}))
        ->capture_default_str();
    run_cmd->add_option("--cadence", run.cadence_hz, "frames per second")->capture_default_str();
    run_cmd->add_option("--out", run.out, "output root for state/ and outbox/")->capture_default_str();
    run_cmd->add_option("--session-id", run.session.session_id)->capture_default_str();

    std::filesystem::path log_path;
    std::optional<std::filesystem::path> replay_out;
    auto* replay_cmd = app.add_subcommand("replay", "fold an event log and print the final state");
    replay_cmd->add_option("--log", log_path, "event log")->required()->check(CLI::ExistingFile);
    replay_cmd->add_option("--out", replay_out, "write the state here instead of stdout");

    std::filesystem::path validate_scene;
    auto* validate_cmd = app.add_subcommand("validate", "check a scene directory");
    validate_cmd->add_option("--scene", validate_scene, "scene directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) {
            if (!deny.empty()) run.session.policy.denylist = {deny.begin(), deny.end()};
            run.session.policy.allowlist = {allow.begin(), allow.end()};
            if (stale_after > 0) run.session.stale_after_frames = stale_after;
            if (const char* token = std::getenv("AOR_MLLM_TOKEN")) run.mllm_token = token;
            if (run.serve) {
                std::signal(SIGINT, on_signal);
                std::signal(SIGTERM, on_signal);
                const auto summary = aor::service::run_served(
                    run, [] { return !g_interrupted.load(); },
                    [](const std::string& address) {
                        std::printf("listening on %s\n", address.c_str());
                        std::fflush(stdout);
                    });
                print_summary(summary);
            } else {
                print_summary(aor::service::run_headless(run));
            }
        } else if (*replay_cmd) {
            const std::string rendered = aor::service::render_state(aor::service::replay_log(log_path));
            if (replay_out) {
                std::ofstream out(*replay_out, std::ios::binary | std::ios::trunc);
                out << rendered;
                if (!out) throw aor::Error(aor::ErrorCode::kIo, "cannot write " + replay_out->string());
            } else {
                std::cout << rendered;
            }
        } else if (*validate_cmd) {
            const auto scene = aor::load_scene(validate_scene);
            std::size_t rows = 0;
            for (const auto& frame_rows : scene.ground_truth) rows += frame_rows.size();
            std::printf("ok: %s: %zu frames, %dx%d, %zu ground-truth detections\n", scene.name.c_str(),
                        scene.frame_count(), scene.intrinsics.width, scene.intrinsics.height, rows);
        }
    } catch (const aor::Error& e) {
        std::fprintf(stderr, "aor: %s: %s\n", std::string(aor::to_string(e.code())).c_str(), e.what());
        return e.code() == aor::ErrorCode::kLog ? 2 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "aor: %s\n", e.what());
        return 1;
    }
    return 0;
}
