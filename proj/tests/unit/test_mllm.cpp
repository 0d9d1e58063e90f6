// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <atomic>
#include <thread>

#include <nlohmann/json.hpp>

#include "aor/mllm_client.hpp"
#include "support.hpp"

// After the Eigen users: <resolv.h> defines a _res macro.
#include <httplib.h>

using namespace aor;
using namespace aor::mllm;
using nlohmann::json;

namespace {

ColorFrame tiny_image() {
    ColorFrame f(2, 1);
    f.rgb = {1, 2, 3, 4, 5, 6};
    return f;
}

MllmRequest make(const std::string& prompt, std::vector<Turn> history = {},
                 std::vector<std::string> labels = {"cup"}, const std::string& conv = "conv-p1") {
    return MllmRequest::create(conv, std::move(history), {{std::move(labels), tiny_image()}}, prompt,
                               detection::FilterPolicy{});
}

// Runs an httplib server on an ephemeral port for the duration of a test.
class StubServer {
public:
    explicit StubServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
        server_.Post("/v1/chat", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat"; }

private:
    httplib::Server server_;
    int port_{0};
    std::thread thread_;
};

}  // namespace

TEST_SUITE("mllm") {

TEST_CASE("fingerprint matches an independent hashlib computation") {
    CHECK(image_content_hash(tiny_image()) ==
          "f25af82c68d29a6c012779bae23ccc6e5640b399d8b0e0b4eddb25ea7f2a61dd");
    const auto req = make("hello", {{Turn::Role::kUser, "q"}, {Turn::Role::kAssistant, "a"}});
    CHECK(fingerprint(req) == "6c838a178a4211bf329d708c5b938e6bc6899d00c0fdbd13fa39015a8e2b4399");
    const auto bare = MllmRequest::create("c", {}, {}, "hello", detection::FilterPolicy{});
    CHECK(fingerprint(bare) == "3912f203837659aa3cd38e314792c0200b85bea3889804c5a02f88063c31f7b2");
}

TEST_CASE("fingerprint ignores the conversation id and labels but not content") {
    CHECK(fingerprint(make("x", {}, {"cup"}, "a")) == fingerprint(make("x", {}, {"bowl"}, "b")));
    CHECK(fingerprint(make("x")) != fingerprint(make("y")));
    CHECK(fingerprint(make("c", {{Turn::Role::kUser, "ab"}})) !=
          fingerprint(make("bc", {{Turn::Role::kUser, "a"}})));
}

TEST_CASE("requests with denylisted or missing labels are rejected at construction") {
    detection::FilterPolicy policy;
    for (const auto& labels : {std::vector<std::string>{"person"},
                               std::vector<std::string>{"cup", "person"},
                               std::vector<std::string>{}}) {
        try {
            MllmRequest::create("c", {}, {{labels, tiny_image()}}, "p", policy);
            FAIL("expected privacy error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::kPrivacy);
        }
    }
    policy.denylist = {"dog"};
    CHECK_NOTHROW(MllmRequest::create("c", {}, {{{"person"}, tiny_image()}}, "p", policy));
    CHECK_THROWS_AS(MllmRequest::create("", {}, {}, "p", detection::FilterPolicy{}), Error);
}

TEST_CASE("mock rules match in order and fall back to echo") {
    MockRule fixed;
    fixed.prompt_contains = "price";
    fixed.label = "cup";
    fixed.action = MockRule::Action::kFixed;
    fixed.text = "3 EUR";
    fixed.latency_ms = 12;
    MockRule fail;
    fail.conversation = "cmp-1";
    fail.action = MockRule::Action::kFail;
    MockBackend mock({fixed, fail});
    const auto r = mock.query(make("what price?"));
    CHECK(r.text == "3 EUR");
    CHECK(r.latency_ms == 12);
    CHECK(mock.query(make("what price?", {}, {"bowl"})).text == "what price?");
    CHECK_THROWS_AS(mock.query(make("x", {}, {"cup"}, "cmp-1")), Error);
}

TEST_CASE("mock rules load from a file") {
    const auto mock = MockBackend::from_file(aor::test::fixtures_dir() / "mllm" / "kitchen.rules.json");
    auto copy = mock;
    CHECK(copy.query(make("How long to cook this?", {}, {"book"})).text == "Cook for 10 minutes");
    aor::test::TempDir dir;
    aor::test::write_file(dir / "bad.json", "{");
    CHECK_THROWS_AS(MockBackend::from_file(dir / "bad.json"), Error);
}

TEST_CASE("replay store round-trips through a file bit-exactly") {
    ReplayStore store;
    CHECK(store.insert("aa", {"one", 1.5}));
    CHECK(store.insert("bb", {"two \"quoted\"\nline", 0.1 + 0.2}));
    CHECK_FALSE(store.insert("aa", {"other", 0}));
    CHECK(store.size() == 2);
    aor::test::TempDir dir;
    store.save(dir / "s.jsonl");
    const auto loaded = ReplayStore::load(dir / "s.jsonl");
    CHECK(loaded == store);
    loaded.save(dir / "t.jsonl");
    CHECK(aor::test::read_file(dir / "s.jsonl") == aor::test::read_file(dir / "t.jsonl"));
}

TEST_CASE("recording then replaying returns the same replies") {
    aor::test::TempDir dir;
    auto mock = std::make_shared<MockBackend>();
    RecordingBackend rec(mock, dir / "store.jsonl");
    const auto a = rec.query(make("first"));
    rec.query(make("second"));
    rec.query(make("first"));
    CHECK(rec.store().size() == 2);
    CHECK(aor::test::read_lines(dir / "store.jsonl").size() == 2);
    CHECK(a.backend == "record:mock");

    auto store = std::make_shared<const ReplayStore>(ReplayStore::load(dir / "store.jsonl"));
    ReplayBackend replay(store);
    CHECK(replay.query(make("first")).text == a.text);
    try {
        replay.query(make("never seen"));
        FAIL("expected replay miss");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kReplayMiss);
    }

    // Reopening an existing store keeps its entries.
    RecordingBackend again(mock, dir / "store.jsonl");
    CHECK(again.store().size() == 2);
}

TEST_CASE("audit records are redacted") {
    aor::test::TempDir dir;
    auto audit = std::make_shared<AuditLog>(dir / "audit.jsonl");
    Client client(std::make_shared<MockBackend>(), audit);
    client.query(make("secret prompt text"));
    MockRule fail;
    fail.action = MockRule::Action::kFail;
    Client failing(std::make_shared<MockBackend>(std::vector<MockRule>{fail}), audit);
    CHECK_THROWS_AS(failing.query(make("another")), Error);

    const auto records = AuditLog::read(dir / "audit.jsonl");
    REQUIRE(records.size() == 2);
    CHECK(records[0].status == "ok");
    CHECK(records[0].labels == std::vector<std::string>{"cup"});
    CHECK(records[0].prompt_bytes == std::string("secret prompt text").size());
    CHECK(records[0].image_bytes == 6);
    CHECK(records[1].status != "ok");
    const std::string raw = aor::test::read_file(dir / "audit.jsonl");
    CHECK(raw.find("secret") == std::string::npos);
    CHECK(raw.find("another") == std::string::npos);
}

TEST_CASE("base64") {
    const std::vector<std::uint8_t> bytes{'f', 'o', 'o', 'b', 'a'};
    CHECK(base64_encode(bytes) == "Zm9vYmE=");
    CHECK(base64_encode(std::span<const std::uint8_t>{}) == "");
}

TEST_CASE("live backend posts the documented body") {
    json seen;
    std::string auth;
    StubServer server([&](const httplib::Request& req, httplib::Response& res) {
        seen = json::parse(req.body);
        auth = req.get_header_value("Authorization");
        res.set_content(R"({"text":"It is a mug."})", "application/json");
    });
    LiveBackend live(server.url(), "tok123", std::chrono::milliseconds(3000));
    const auto reply = live.query(make("What is it?", {{Turn::Role::kUser, "hi"}, {Turn::Role::kAssistant, "hello"}}));
    CHECK(reply.text == "It is a mug.");
    CHECK(reply.backend == "live");
    CHECK(auth == "Bearer tok123");
    CHECK(seen["conversation_id"] == "conv-p1");
    CHECK(seen["prompt"] == "What is it?");
    CHECK(seen["history"].size() == 2);
    CHECK(seen["history"][1]["role"] == "assistant");
    REQUIRE(seen["images"].size() == 1);
    CHECK(seen["images"][0].get<std::string>().rfind("iVBORw0KGgo", 0) == 0);
}

TEST_CASE("live backend maps failures to error codes and retries once on timeout") {
    std::atomic<int> calls{0};
    StubServer slow([&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        std::this_thread::sleep_for(std::chrono::milliseconds(400));
        res.set_content(R"({"text":"late"})", "application/json");
    });
    LiveBackend live(slow.url(), "", std::chrono::milliseconds(100), 1);
    try {
        live.query(make("x"));
        FAIL("expected timeout");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kTimeout);
    }
    CHECK(calls.load() == 2);

    StubServer broken([](const httplib::Request&, httplib::Response& res) {
        res.status = 200;
        res.set_content("not json", "text/plain");
    });
    try {
        LiveBackend(broken.url()).query(make("x"));
        FAIL("expected protocol error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kProtocol);
    }

    StubServer down([](const httplib::Request&, httplib::Response& res) { res.status = 503; });
    try {
        LiveBackend(down.url()).query(make("x"));
        FAIL("expected unavailable");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kBackendUnavailable);
    }
}

}  // TEST_SUITE
