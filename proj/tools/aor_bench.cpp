// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

// Pipeline-core step latency: filter, localize and registry upsert per frame,
// over repeated passes through a scene. Prints p50/p95 in milliseconds.

#include <cstdio>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "aor/error.hpp"
#include "aor/service/runtime.hpp"
#include "aor/service/trace.hpp"

#ifndef AOR_FIXTURES_DIR
#define AOR_FIXTURES_DIR "fixtures"
#endif

int main(int argc, char** argv) {
    CLI::App app{"aor_bench: pipeline-core step timings"};
    std::filesystem::path scene_path = std::filesystem::path(AOR_FIXTURES_DIR) / "scenes" / "kitchen_counter";
    int passes = 50;
    app.add_option("--scene", scene_path)->capture_default_str()->check(CLI::ExistingDirectory);
    app.add_option("--passes", passes, "passes through the scene")->capture_default_str()->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    try {
        using namespace aor::service;
        const auto scene = aor::load_shared_scene(scene_path);
        std::vector<double> core;
        for (int pass = 0; pass < passes; ++pass) {
            auto clock = std::make_shared<VirtualClock>();
            SessionDeps deps{scene, make_detector("scripted", scene),
                             std::make_shared<aor::mllm::Client>(std::make_shared<aor::mllm::MockBackend>(),
                                                                 std::make_shared<aor::mllm::AuditLog>()),
                             clock, std::make_shared<InlineExecutor>()};
            Session session(SessionConfig{}, deps);
            run_all_frames(session, *clock, frame_period_ms(30));
            for (const auto& t : session.timings()) core.push_back(t.core_ms);
        }
        const auto p = percentiles(core);
        const nlohmann::json report{{"scene", scene->name},
                                    {"width", scene->intrinsics.width},
                                    {"height", scene->intrinsics.height},
                                    {"steps", core.size()},
                                    {"core_ms_p50", p.p50},
                                    {"core_ms_p95", p.p95}};
        std::printf("%s\n", report.dump().c_str());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "aor_bench: %s\n", e.what());
        return 1;
    }
    return 0;
}
