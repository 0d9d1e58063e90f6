// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include "aor/service/trace.hpp"

#include <cmath>
#include <fstream>

#include "aor/error.hpp"

namespace aor::service {
using nlohmann::json;

TraceEntry parse_trace_entry(const json& j) try {
    if (!j.is_object() || !j.contains("op") || !j.at("op").is_string()) {
        throw Error(ErrorCode::kParse, "trace entry needs a string 'op'");
    }
    const auto op = j.at("op").get<std::string>();
    TraceEntry e;
    if (op == "step") {
        e.op = TraceEntry::Op::kStep;
        e.count = j.value("count", std::size_t{1});
        if (e.count == 0) throw Error(ErrorCode::kParse, "step: count must be positive");
    } else if (op == "step_all") {
        e.op = TraceEntry::Op::kStepAll;
    } else if (op == "advance") {
        e.op = TraceEntry::Op::kAdvance;
        e.ms = j.at("ms").get<std::int64_t>();
        if (e.ms < 0) throw Error(ErrorCode::kParse, "advance: negative ms");
    } else if (op == "command") {
        e.op = TraceEntry::Op::kCommand;
        e.command = j.at("command");
    } else {
        throw Error(ErrorCode::kParse, "unknown trace op '" + op + "'");
    }
    return e;
} catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("trace entry: ") + e.what());
}

std::vector<TraceEntry> load_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kParse, "cannot open trace " + path.string());
    std::vector<TraceEntry> trace;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            trace.push_back(parse_trace_entry(json::parse(line)));
        } catch (const std::exception& e) {
            throw Error(ErrorCode::kParse,
                        path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return trace;
}

std::int64_t frame_period_ms(double cadence_hz) {
    if (!(cadence_hz > 0) || !std::isfinite(cadence_hz)) {
        throw Error(ErrorCode::kValidation, "cadence must be a positive number");
    }
    return std::max<std::int64_t>(1, std::llround(1000.0 / cadence_hz));
}

void step_frame(Session& session, VirtualClock& clock, std::int64_t period_ms) {
    if (session.next_frame() > 0) clock.advance(period_ms);
    session.step();
}

void run_trace(Session& session, VirtualClock& clock, std::span<const TraceEntry> trace,
               std::int64_t period_ms) {
    for (const auto& e : trace) {
        switch (e.op) {
            case TraceEntry::Op::kStep:
                for (std::size_t i = 0; i < e.count; ++i) step_frame(session, clock, period_ms);
                break;
            case TraceEntry::Op::kStepAll:
                run_all_frames(session, clock, period_ms);
                break;
            case TraceEntry::Op::kAdvance:
                session.advance(e.ms);
                break;
            case TraceEntry::Op::kCommand:
                session.handle_json(e.command);
                break;
        }
        session.wait_for_jobs();
        session.poll();
    }
}

void run_all_frames(Session& session, VirtualClock& clock, std::int64_t period_ms) {
    while (session.frames_remaining()) step_frame(session, clock, period_ms);
}

}  // namespace aor::service
