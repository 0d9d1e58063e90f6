// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any of them fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "aor/actions.hpp"
#include "aor/anchoring.hpp"
#include "aor/comparer.hpp"
#include "aor/conversation.hpp"
#include "aor/geometry.hpp"
#include "aor/json_codec.hpp"
#include "aor/mllm_client.hpp"
#include "aor/service/runtime.hpp"
#include "aor/service/trace.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace aor;
using namespace aor::geometry;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass{false};
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

int run_cli(const std::string& args, std::string* out = nullptr) {
    const std::string command = std::string(AOR_CLI) + " " + args + " 2>&1";
    FILE* pipe = popen(command.c_str(), "r");
    if (!pipe) return -1;
    std::string text;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) text.append(buf, n);
    const int raw = pclose(pipe);
    if (out) *out = std::move(text);
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string quoted(const std::string& p) { return "'" + p + "'"; }

Pose random_pose(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0, 1);
    std::uniform_real_distribution<double> t(-5, 5);
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    Pose pose;
    pose.rotation = q.toRotationMatrix();
    pose.translation = {t(rng), t(rng), t(rng)};
    return pose;
}

// ---------------------------------------------------------------- geometry

Outcome geometry_roundtrip() {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> f(100, 2000), unit(0, 1), depth(0.05, 50);
    double worst = 0;
    for (int i = 0; i < 10000; ++i) {
        CameraIntrinsics k;
        k.width = 1 + static_cast<int>(unit(rng) * 1919);
        k.height = 1 + static_cast<int>(unit(rng) * 1079);
        k.fx = f(rng);
        k.fy = f(rng);
        k.cx = unit(rng) * (k.width - 1);
        k.cy = unit(rng) * (k.height - 1);
        const Pose pose = random_pose(rng);
        const PixelPoint p{unit(rng) * (k.width - 1), unit(rng) * (k.height - 1)};
        const auto back = project(pose.to_world(backproject(p, depth(rng), k)), pose, k);
        if (!back) return {false, "point projected behind the camera"};
        worst = std::max(worst, (*back - p).norm());
    }
    return {worst < 1e-6, "10^4 inputs, max error " + fmt(worst) + " px"};
}

Outcome geometry_rigid_invariance() {
    std::mt19937_64 rng(8);
    const auto k = aor::test::vga_intrinsics();
    std::uniform_real_distribution<double> depth(0.3, 9), u(0, k.width - 1), v(0, k.height - 1);
    double worst = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto df = DepthFrame::constant(k.width, k.height, depth(rng));
        const PixelPoint p{u(rng), v(rng)};
        const Pose pose = random_pose(rng);
        const auto base = raycast_to_world(p, df, k, Pose::identity());
        const auto moved = raycast_to_world(p, df, k, pose);
        if (!base || !moved) return {false, "raycast found no depth"};
        worst = std::max(worst, (*moved - pose.to_world(*base)).norm());
    }
    return {worst < 1e-9, "10^4 poses, max deviation " + fmt(worst) + " m"};
}

Outcome geometry_two_pose_box() {
    const auto k = aor::test::vga_intrinsics();
    const Eigen::Vector3d center{1, 0, 2};
    const Eigen::Vector3d half{0.005, 0.005, 0.005};
    double worst = 0;
    std::vector<WorldPoint> anchors;
    for (const Eigen::Vector3d eye : {Eigen::Vector3d{0, 0, 0}, Eigen::Vector3d{0.4, -0.1, 0.2}}) {
        const Pose pose = aor::test::look_at(eye, center);
        const auto r = aor::test::render_box(center - half, center + half, pose, k);
        if (r.hits == 0) return {false, "box not visible"};
        const auto w = raycast_to_world(PixelPoint{r.bbox.center_u(), r.bbox.center_v()}, r.depth, k, pose, 1);
        if (!w) return {false, "no depth at the bbox center"};
        worst = std::max(worst, (*w - center).norm());
        anchors.push_back(*w);
    }
    const double spread = (anchors[0] - anchors[1]).norm();
    return {worst < 0.02 && spread < 0.02,
            "max error " + fmt(worst * 100) + " cm, spread " + fmt(spread * 100) + " cm"};
}

// ---------------------------------------------------------------- registry

Outcome registry_dedup() {
    std::mt19937_64 rng(9);
    const std::vector<std::string> labels{"cup", "bottle", "book"};
    std::uniform_real_distribution<double> coord(-1, 1), radius(0.05, 0.6);
    const CropRef crop{0, {0, 0, 4, 4}};
    std::size_t violations = 0;
    for (int s = 0; s < 1000; ++s) {
        const double r = radius(rng);
        anchoring::ProxyRegistry reg(r);
        const int n = 1 + static_cast<int>(rng() % 40);
        for (int i = 0; i < n; ++i) {
            reg.upsert(labels[rng() % labels.size()], {coord(rng), coord(rng), 1 + coord(rng)}, crop,
                       static_cast<std::size_t>(i));
        }
        for (const auto& [ia, a] : reg.proxies()) {
            for (const auto& [ib, b] : reg.proxies()) {
                if (ia < ib && a.label == b.label && (a.world_pos - b.world_pos).norm() < r) ++violations;
            }
        }
    }
    return {violations == 0, "10^3 sequences, " + std::to_string(violations) + " violations"};
}

struct E2E {
    fs::path dir_a, dir_b;
    service::OutputLayout a, b;
    double run_seconds{0};
    int status_a{-1}, status_b{-1};
    std::string output;
};

Outcome registry_anchors_immutable(const std::vector<service::SessionEvent>& log) {
    std::map<std::string, json> first;
    std::size_t checked = 0;
    service::SessionState s;
    for (const auto& e : log) {
        s.apply(e);
        if (e.kind == service::EventKind::kProxySpawned) first[e.payload.at("proxy")] = e.payload.at("world_pos");
        for (const auto& [id, p] : s.registry().proxies()) {
            if (codec::point(p.world_pos) != first.at(id.str())) return {false, id.str() + " moved at seq " + std::to_string(e.seq)};
            ++checked;
        }
    }
    return {!first.empty(), std::to_string(first.size()) + " anchors, " + std::to_string(checked) +
                                " position checks over " + std::to_string(log.size()) + " events"};
}

Outcome registry_legal_transitions(const std::vector<std::vector<service::SessionEvent>>& logs) {
    std::size_t transitions = 0;
    for (const auto& log : logs) {
        service::SessionState s;
        for (const auto& e : log) {
            if (e.kind == service::EventKind::kStateChanged) {
                const auto from = anchoring::parse_proxy_state(e.payload.at("from").get<std::string>());
                const auto to = anchoring::parse_proxy_state(e.payload.at("to").get<std::string>());
                if (!from || !to || !anchoring::is_legal_transition(*from, *to)) {
                    return {false, "illegal transition at seq " + std::to_string(e.seq)};
                }
                const auto id = anchoring::ProxyId::parse(e.payload.at("proxy").get<std::string>());
                if (!id || s.registry().get(*id).state != *from) {
                    return {false, "from-state mismatch at seq " + std::to_string(e.seq)};
                }
                ++transitions;
            }
            s.apply(e);
        }
    }
    return {transitions > 0, std::to_string(logs.size()) + " logs, " + std::to_string(transitions) +
                                 " transitions, all legal"};
}

// ---------------------------------------------------------------- privacy

Outcome privacy_audit(const fs::path& audit, const std::vector<service::SessionEvent>& log) {
    std::size_t person_detections = 0;
    for (const auto& e : log) {
        if (e.kind != service::EventKind::kFrameProcessed) continue;
        for (const auto& s : e.payload.at("suppressed")) person_detections += s.at("label") == "person";
    }
    const auto records = mllm::AuditLog::read(audit);
    std::size_t hits = 0;
    for (const auto& r : records) hits += std::count(r.labels.begin(), r.labels.end(), "person");
    const std::string text = aor::test::read_file(audit);
    const bool mentions = text.find("person") != std::string::npos;
    return {person_detections > 0 && !records.empty() && hits == 0 && !mentions,
            std::to_string(person_detections) + " person detections suppressed, " +
                std::to_string(records.size()) + " audit records, " + std::to_string(hits) +
                " denylisted labels"};
}

Outcome privacy_rejected_at_construction() {
    const auto image = aor::test::solid_frame(2, 2, 1, 2, 3);
    detection::FilterPolicy policy;
    try {
        mllm::MllmRequest::create("conv-p1", {}, {{{"cup", "person"}, image}}, "What is this?", policy);
    } catch (const Error& e) {
        return {e.code() == ErrorCode::kPrivacy, std::string("rejected: ") + e.what()};
    }
    return {false, "request with a denylisted label was constructed"};
}

// ---------------------------------------------------------------- prompts

class CapturingBackend final : public mllm::Backend {
public:
    explicit CapturingBackend(std::shared_ptr<mllm::Backend> inner) : inner_(std::move(inner)) {}
    mllm::MllmReply query(const mllm::MllmRequest& request) override {
        prompts.push_back(request.prompt());
        return inner_->query(request);
    }
    std::string tag() const override { return "capture"; }
    std::vector<std::string> prompts;

private:
    std::shared_ptr<mllm::Backend> inner_;
};

Outcome prompt_fidelity() {
    const auto fx = aor::test::fixtures_dir();
    const std::string info = aor::test::read_file(fx / "prompts" / "info_summary.txt");
    const std::string indexing = aor::test::read_file(fx / "prompts" / "indexing_subprompt.txt");
    if (std::string(conversation::kInfoSummaryPrompt) != info) return {false, "info prompt differs"};
    if (std::string(comparer::kIndexingSubPrompt) != indexing) return {false, "indexing sub-prompt differs"};

    // And on the wire: what the backend actually receives.
    auto capture = std::make_shared<CapturingBackend>(std::make_shared<mllm::MockBackend>(
        mllm::MockBackend::from_file(fx / "mllm" / "kitchen.rules.json")));
    const auto scene = load_shared_scene(aor::test::scene_dir("kitchen_counter"));
    auto clock = std::make_shared<service::VirtualClock>();
    service::Session session({}, {scene, std::make_shared<detection::ScriptedDetector>(scene),
                                  std::make_shared<mllm::Client>(capture, nullptr), clock,
                                  std::make_shared<service::InlineExecutor>()});
    service::step_frame(session, *clock, 33);
    service::step_frame(session, *clock, 33);
    session.handle_json({{"type", "select"}, {"proxy", "p6"}});
    session.handle_json({{"type", "dispatch"}, {"proxy", "p6"}, {"action", "info"}});
    const std::string which = "Which of these products contain lactose?";
    session.handle_json({{"type", "compare"}, {"proxies", {"p1", "p2", "p3"}}, {"prompt", which}});
    const std::vector<std::string> expected{info, which, which + " " + indexing};
    if (capture->prompts != expected) return {false, "outbound prompts differ from the pinned text"};
    return {true, "constants and outbound prompts byte-equal (" + std::to_string(info.size()) + " and " +
                      std::to_string(indexing.size()) + " bytes)"};
}

// ---------------------------------------------------------------- comparer

Outcome comparer_stitch() {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 6);
        std::vector<CropImage> crops;
        int sum_w = 0, max_h = 0;
        for (int i = 0; i < n; ++i) {
            const int w = 1 + static_cast<int>(rng() % 200);
            const int h = 1 + static_cast<int>(rng() % 200);
            sum_w += w;
            max_h = std::max(max_h, h);
            CropImage c;
            c.bbox = {0, 0, w, h};
            c.pixels = aor::test::solid_frame(w, h, 200, 100, 50);
            crops.push_back(std::move(c));
        }
        const auto s = comparer::stitch(crops);
        if (s.pixels.width != sum_w + comparer::kSeparatorWidth * (n - 1) || s.pixels.height != max_h) {
            return {false, "trial " + std::to_string(trial) + " has the wrong size"};
        }
    }
    return {true, "1000 random crop sets, width = sum(w) + " + std::to_string(comparer::kSeparatorWidth) +
                      "(n-1), height = max(h)"};
}

class CountingBackend final : public mllm::Backend {
public:
    mllm::MllmReply query(const mllm::MllmRequest&) override {
        ++count;
        return {count == 1 ? "answer" : "1", 1, "count"};
    }
    std::string tag() const override { return "count"; }
    int count{0};
};

Outcome comparer_request_counts() {
    anchoring::ProxyRegistry reg;
    const auto a = reg.upsert("cup", {-0.3, 0, 1.5}, {0, {100, 200, 20, 20}}, 0).first;
    const auto b = reg.upsert("cup", {0.3, 0, 1.5}, {0, {400, 200, 20, 20}}, 0).first;
    const std::vector<anchoring::ProxyId> ids{a, b};
    const auto k = aor::test::vga_intrinsics();
    const comparer::CropResolver resolve = [](const anchoring::ObjectProxy& p) {
        CropImage c;
        c.bbox = p.crop.bbox;
        c.pixels = aor::test::solid_frame(p.crop.bbox.w, p.crop.bbox.h, 9, 9, 9);
        return c;
    };
    auto counts = [&](const std::string& prompt) {
        auto backend = std::make_shared<CountingBackend>();
        mllm::Client client(backend, nullptr);
        conversation::ConversationBook book;
        comparer::compare(reg, ids, prompt, Pose::identity(), k, resolve, book, "cmp-1", client,
                          detection::FilterPolicy{});
        return backend->count;
    };
    const int plain = counts("Compare the calories of these two.");
    const int which = counts("Which one is cheaper?");
    return {plain == 1 && which == 2,
            "non-which " + std::to_string(plain) + " request(s), which " + std::to_string(which)};
}

Outcome comparer_lactose(const E2E& run) {
    const auto state = json::parse(aor::test::read_file(run.a.final_state));
    const json* job = nullptr;
    for (const auto& j : state.at("comparer_jobs")) {
        if (j.at("prompt") == "Which of these products contain lactose?") job = &j;
    }
    if (!job) return {false, "no lactose comparer job in the final state"};
    // The first audit record of the job's conversation fingerprints the question.
    const auto store = mllm::ReplayStore::load(aor::test::fixtures_dir() / "mllm" / "kitchen.jsonl");
    std::optional<std::string> recorded;
    for (const auto& r : mllm::AuditLog::read(run.a.audit)) {
        if (r.conversation_id == job->at("conversation")) {
            if (const auto hit = store.find(r.fingerprint)) recorded = hit->text;
            break;
        }
    }
    if (!recorded) return {false, "no recorded reply for the job's first request"};
    std::set<std::string> marked;
    for (const auto& p : state.at("proxies")) {
        if (p.at("marked").get<bool>()) marked.insert(p.at("id").get<std::string>());
    }
    std::set<std::string> expected;
    for (const int i : job->at("indices")) expected.insert(job->at("proxies").at(i).get<std::string>());
    const std::string labels_marked = [&] {
        std::string out;
        for (const auto& p : state.at("proxies")) {
            if (p.at("marked").get<bool>()) out += (out.empty() ? "" : ",") + p.at("label").get<std::string>();
        }
        return out;
    }();
    const bool ok = job->at("answer") == *recorded && marked == expected &&
                    marked == std::set<std::string>{"p1", "p3"};
    return {ok, "answer matches the recorded reply, marked " + std::to_string(marked.size()) + " (" +
                    labels_marked + ")"};
}

// ---------------------------------------------------------------- end to end

E2E run_kitchen_twice(const fs::path& root) {
    E2E e;
    e.dir_a = root / "a";
    e.dir_b = root / "b";
    const auto fx = aor::test::fixtures_dir();
    auto args = [&](const fs::path& out) {
        return "run --scene " + quoted(aor::test::scene_dir("kitchen_counter")) + " --mllm " +
               quoted("replay:" + (fx / "mllm" / "kitchen.jsonl").string()) + " --trace " +
               quoted(fx / "traces" / "kitchen.trace.jsonl") + " --clock virtual --out " + quoted(out);
    };
    const auto t0 = Clock::now();
    e.status_a = run_cli(args(e.dir_a), &e.output);
    e.status_b = run_cli(args(e.dir_b));
    e.run_seconds = seconds_since(t0);
    e.a = service::OutputLayout::under(e.dir_a, "0001");
    e.b = service::OutputLayout::under(e.dir_b, "0001");
    return e;
}

Outcome e2e_identical(const E2E& e) {
    if (e.status_a != 0 || e.status_b != 0) return {false, "aor run failed: " + e.output};
    for (const auto& [x, y] : {std::pair{e.a.events, e.b.events}, std::pair{e.a.final_state, e.b.final_state},
                               std::pair{e.a.audit, e.b.audit}, std::pair{e.a.shares, e.b.shares},
                               std::pair{e.a.shopping, e.b.shopping}}) {
        if (aor::test::read_file(x) != aor::test::read_file(y)) return {false, x.filename().string() + " differs"};
    }
    const auto log = service::read_event_log(e.a.events);
    std::size_t errors = 0;
    for (const auto& ev : log) errors += ev.kind == service::EventKind::kError;
    return {errors == 0, std::to_string(log.size()) + " events, byte-identical logs, state, audit and outbox; " +
                             std::to_string(errors) + " error events"};
}

Outcome e2e_replay(const E2E& e, double* seconds) {
    const auto t0 = Clock::now();
    std::string out;
    const int status = run_cli("replay --log " + quoted(e.a.events), &out);
    *seconds = seconds_since(t0);
    if (status != 0) return {false, "aor replay failed: " + out};
    return {out == aor::test::read_file(e.a.final_state), "replayed state equals the run's final state (" +
                                                              std::to_string(out.size()) + " bytes)"};
}

// ---------------------------------------------------------------- performance

Outcome core_step_latency() {
    const auto scene = load_shared_scene(aor::test::scene_dir("kitchen_counter"));
    std::vector<double> core;
    for (int pass = 0; pass < 30; ++pass) {
        auto clock = std::make_shared<service::VirtualClock>();
        service::Session session({}, {scene, std::make_shared<detection::ScriptedDetector>(scene),
                                      std::make_shared<mllm::Client>(std::make_shared<mllm::MockBackend>(), nullptr),
                                      clock, std::make_shared<service::InlineExecutor>()});
        service::run_all_frames(session, *clock, 33);
        for (const auto& t : session.timings()) core.push_back(t.core_ms);
    }
    const auto p = service::percentiles(core);
    return {p.p50 <= 5.0 && scene->intrinsics.width == 640 && scene->intrinsics.height == 480,
            std::to_string(core.size()) + " steps at " + std::to_string(scene->intrinsics.width) + "x" +
                std::to_string(scene->intrinsics.height) + ", p50 " + fmt(p.p50) + " ms, p95 " + fmt(p.p95) + " ms"};
}

// ---------------------------------------------------------------- timer

Outcome countdown_fires_once() {
    actions::WidgetBoard board;
    const auto id = board.create({1}, actions::CountdownWidget{600'000, 600'000, false}, 0);
    if (!board.tick(599'999).empty()) return {false, "fired early"};
    const auto fired = board.tick(600'000);
    if (fired.size() != 1 || fired[0].id != id || fired[0].expired_at_ms != 600'000) {
        return {false, "did not fire exactly once at +600 s"};
    }
    std::int64_t now = 600'000;
    std::size_t extra = 0;
    for (int i = 0; i < 10000; ++i) extra += board.tick(now += 33).size();
    return {extra == 0, "fired once at +600000 ms, " + std::to_string(extra) + " fires over 10^4 further ticks"};
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](const std::string& name, const std::function<Outcome()>& check) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s %-36s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    };

    const auto geo0 = Clock::now();
    report("geometry.roundtrip", geometry_roundtrip);
    report("geometry.rigid-invariance", geometry_rigid_invariance);
    report("geometry.two-pose-box", geometry_two_pose_box);
    const double geo_seconds = seconds_since(geo0);
    report("geometry.runtime", [&] { return Outcome{geo_seconds < 10, fmt(geo_seconds) + " s (limit 10 s)"}; });

    aor::test::TempDir tmp;
    const auto e2e = run_kitchen_twice(tmp.path());
    std::vector<service::SessionEvent> kitchen_log;
    try {
        kitchen_log = service::read_event_log(e2e.a.events);
    } catch (const std::exception&) {
    }

    report("registry.dedup", registry_dedup);
    report("registry.anchors-immutable", [&] { return registry_anchors_immutable(kitchen_log); });
    report("registry.legal-transitions", [&] {
        aor::test::TempDir synth;
        const int status = run_cli("run --scene " + quoted(aor::test::scene_dir("synthetic_boxes")) +
                                   " --out " + quoted(synth.path()));
        if (status != 0) return Outcome{false, "synthetic run failed"};
        return registry_legal_transitions(
            {kitchen_log, service::read_event_log(service::OutputLayout::under(synth.path(), "0001").events)});
    });

    report("privacy.audit-has-no-denylisted-labels", [&] { return privacy_audit(e2e.a.audit, kitchen_log); });
    report("privacy.violating-request-rejected", privacy_rejected_at_construction);

    report("prompts.byte-equal", prompt_fidelity);

    report("comparer.stitch-formula", comparer_stitch);
    report("comparer.request-counts", comparer_request_counts);
    report("comparer.lactose-fixture", [&] { return comparer_lactose(e2e); });

    report("e2e.run-byte-identical", [&] { return e2e_identical(e2e); });
    double replay_seconds = 0;
    report("e2e.replay-identical", [&] { return e2e_replay(e2e, &replay_seconds); });
    report("e2e.runtime", [&] {
        const double total = e2e.run_seconds + replay_seconds;
        return Outcome{total < 30, "2 runs + replay in " + fmt(total) + " s (limit 30 s)"};
    });

    report("performance.core-step-median", core_step_latency);
    report("timer.countdown-fires-once", countdown_fires_once);

    std::printf("%s: %d failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
