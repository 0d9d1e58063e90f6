// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

// Scripted interaction traces for headless runs. One JSON object per line:
//
//   {"op": "step", "count": 3}      process the next frames
//   {"op": "step_all"}              process every remaining frame
//   {"op": "advance", "ms": 600000} move the virtual clock
//   {"op": "command", "command": {...}}
//
// Before every frame except the first the clock moves by one frame period.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "aor/service/session.hpp"

namespace aor::service {

struct TraceEntry {
    enum class Op { kStep, kStepAll, kAdvance, kCommand };

    Op op{Op::kStep};
    std::size_t count{1};
    std::int64_t ms{0};
    nlohmann::json command;
};

/// Throws Error(kParse) naming the bad line.
std::vector<TraceEntry> load_trace(const std::filesystem::path& path);
TraceEntry parse_trace_entry(const nlohmann::json& j);

/// 30 Hz -> 33 ms
std::int64_t frame_period_ms(double cadence_hz);

/// Steps one frame, advancing the clock first when this is not frame 0.
void step_frame(Session& session, VirtualClock& clock, std::int64_t period_ms);

void run_trace(Session& session, VirtualClock& clock, std::span<const TraceEntry> trace,
               std::int64_t period_ms);
void run_all_frames(Session& session, VirtualClock& clock, std::int64_t period_ms);

}  // namespace aor::service
