// Copyright (C) 2026 aor contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "aor/actions.hpp"
#include "support.hpp"

using namespace aor;
using namespace aor::actions;
using nlohmann::json;

namespace {

anchoring::ObjectProxy pot() {
    anchoring::ObjectProxy p;
    p.id = {7};
    p.label = "bowl";
    p.world_pos = {-0.18, 0.35, 1.77};
    p.crop = {2, {212, 186, 79, 57}};
    return p;
}

}  // namespace

TEST_SUITE("actions") {

TEST_CASE("catalog pins four categories and the listed actions") {
    std::set<std::pair<std::string, std::string>> got;
    for (const auto& e : catalog()) got.emplace(to_string(e.category), to_string(e.action));
    const std::set<std::pair<std::string, std::string>> expected{
        {"information", "info"},      {"information", "ask"},
        {"compare", "compare"},       {"share", "send_to_contact"},
        {"share", "add_to_shopping_list"}, {"anchor", "note"},
        {"anchor", "timer"},          {"anchor", "countdown"}};
    CHECK(got == expected);
    CHECK(categories().size() == 4);
    CHECK(category_of(ActionId::kCountdown) == ActionCategory::kAnchor);
    for (const auto& e : catalog()) CHECK(parse_action_id(to_string(e.action)) == e.action);
    CHECK_FALSE(parse_action_id("teleport"));
}

TEST_CASE("argument schemas") {
    CHECK_NOTHROW(validate_args(ActionId::kInfo, json::object()));
    CHECK_NOTHROW(validate_args(ActionId::kAsk, {{"question", "How long?"}}));
    CHECK_THROWS_AS(validate_args(ActionId::kAsk, json::object()), Error);
    CHECK_THROWS_AS(validate_args(ActionId::kAsk, {{"question", " "}}), Error);
    CHECK_NOTHROW(validate_args(ActionId::kCompare, {{"with", {"p2"}}, {"prompt", "Which?"}}));
    CHECK_THROWS_AS(validate_args(ActionId::kCompare, {{"with", json::array()}, {"prompt", "x"}}), Error);
    CHECK_THROWS_AS(validate_args(ActionId::kCompare, {{"with", {"x2"}}, {"prompt", "x"}}), Error);
    CHECK_NOTHROW(validate_args(ActionId::kSendToContact, {{"recipient", "Alex"}}));
    CHECK_THROWS_AS(validate_args(ActionId::kSendToContact, {{"recipient", ""}}), Error);
    CHECK_NOTHROW(validate_args(ActionId::kNote, {{"text", "hi"}, {"visibility", "group:family"}}));
    CHECK_THROWS_AS(validate_args(ActionId::kNote, {{"text", "hi"}, {"visibility", "friends"}}), Error);
    CHECK_NOTHROW(validate_args(ActionId::kCountdown, {{"duration_s", 600}}));
    CHECK_NOTHROW(validate_args(ActionId::kCountdown, {{"from_reply_of", "p6"}}));
    CHECK_THROWS_AS(validate_args(ActionId::kCountdown, json::object()), Error);
    CHECK_THROWS_AS(validate_args(ActionId::kCountdown, {{"duration_s", 0}}), Error);
    CHECK_THROWS_AS(validate_args(ActionId::kCountdown, {{"duration_s", 5}, {"from_reply_of", "p1"}}), Error);
    CHECK_THROWS_AS(validate_args(ActionId::kTimer, json::array()), Error);
}

TEST_CASE("durations parse from replies") {
    CHECK(parse_duration_seconds("Cook for 10 minutes") == 600);
    CHECK(parse_duration_seconds("1 hour 30 min") == 5400);
    CHECK(parse_duration_seconds("about 90 seconds") == 90);
    CHECK(parse_duration_seconds("2.5 mins") == 150);
    CHECK_THROWS_AS(parse_duration_seconds("a while"), Error);
    CHECK_THROWS_AS(parse_duration_seconds("10 apples"), Error);
}

TEST_CASE("note visibility strings") {
    CHECK(NoteVisibility::parse("private").str() == "private");
    CHECK(NoteVisibility::parse("public").scope == NoteVisibility::Scope::kPublic);
    const auto g = NoteVisibility::parse("group:family");
    CHECK(g.group == "family");
    CHECK(g.str() == "group:family");
    CHECK_THROWS_AS(NoteVisibility::parse("group:"), Error);
}

TEST_CASE("widgets are created from dispatch arguments") {
    WidgetBoard board;
    const auto note = board.create({1}, make_widget_kind(ActionId::kNote, {{"text", "Wash"}}, 0), 0);
    CHECK(note.str() == "w1");
    CHECK(std::get<NoteWidget>(board.get(note).kind).visibility.scope == NoteVisibility::Scope::kPrivate);
    const auto cd = board.create({7}, make_widget_kind(ActionId::kCountdown, {{"duration_s", 600}}, 5), 5);
    const auto& c = std::get<CountdownWidget>(board.get(cd).kind);
    CHECK(c.duration_ms == 600000);
    CHECK(c.remaining_ms == 600000);
    CHECK_FALSE(c.fired);
    CHECK_THROWS_AS(make_widget_kind(ActionId::kCountdown, {{"from_reply_of", "p6"}}, 0), Error);
    CHECK_THROWS_AS(make_widget_kind(ActionId::kInfo, json::object(), 0), Error);
    CHECK(WidgetId::parse("w3") == WidgetId{3});
    CHECK_FALSE(WidgetId::parse("w0"));
}

TEST_CASE("a 600 s countdown fires exactly once at +600 s") {
    WidgetBoard board;
    const std::int64_t t0 = 600'000;  // created 600 s into the session
    board.tick(t0);
    const auto id = board.create({7}, CountdownWidget{600'000, 600'000, false}, t0);
    CHECK(board.tick(t0 + 599'999).empty());
    CHECK(std::get<CountdownWidget>(board.get(id).kind).remaining_ms == 1);
    const auto fired = board.tick(t0 + 600'000);
    REQUIRE(fired.size() == 1);
    CHECK(fired[0].id == id);
    CHECK(fired[0].expired_at_ms == t0 + 600'000);
    std::int64_t now = t0 + 600'000;
    std::size_t extra = 0;
    for (int i = 0; i < 10000; ++i) {
        now += 1 + i % 997;
        extra += board.tick(now).size();
    }
    CHECK(extra == 0);
    CHECK(std::get<CountdownWidget>(board.get(id).kind).remaining_ms == 0);
}

TEST_CASE("countdowns expiring between two ticks fire in id order") {
    WidgetBoard board;
    const auto a = board.create({1}, CountdownWidget{5000, 5000, false}, 0);
    const auto b = board.create({2}, CountdownWidget{3000, 3000, false}, 0);
    const auto fired = board.tick(10'000);
    REQUIRE(fired.size() == 2);
    CHECK(fired[0].id == a);
    CHECK(fired[1].id == b);
    CHECK(fired[1].expired_at_ms == 3000);
}

TEST_CASE("countdown remaining never increases over monotone ticks") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        WidgetBoard board;
        const std::int64_t duration = 1 + static_cast<std::int64_t>(rng() % 50'000);
        const auto id = board.create({1}, CountdownWidget{duration, duration, false}, 0);
        std::int64_t now = 0, last = duration;
        int fires = 0;
        for (int i = 0; i < 200; ++i) {
            now += static_cast<std::int64_t>(rng() % 1000);
            fires += static_cast<int>(board.tick(now).size());
            const auto& c = std::get<CountdownWidget>(board.get(id).kind);
            REQUIRE(c.remaining_ms <= last);
            REQUIRE(c.remaining_ms >= 0);
            REQUIRE(c.fired == (c.remaining_ms == 0));
            last = c.remaining_ms;
        }
        CHECK(fires == (last == 0 ? 1 : 0));
    }
}

TEST_CASE("timers count up and the clock may not go backwards") {
    WidgetBoard board;
    board.tick(1000);
    const auto id = board.create({1}, TimerWidget{1000, 0}, 1000);
    board.tick(4500);
    CHECK(std::get<TimerWidget>(board.get(id).kind).elapsed_ms == 3500);
    try {
        board.tick(4000);
        FAIL("expected clock error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kClock);
    }
    CHECK_THROWS_AS(board.insert(Widget{{9}, {1}, 10, TimerWidget{10, 0}}), Error);
    CHECK_THROWS_AS(board.insert(Widget{{1}, {1}, 5000, TimerWidget{5000, 0}}), Error);
    CHECK_THROWS_AS(board.insert(Widget{{3}, {1}, 5000, NoteWidget{" ", {}}}), Error);
    CHECK_THROWS_AS(board.insert(Widget{{3}, {1}, 5000, CountdownWidget{10, 11, false}}), Error);
}

TEST_CASE("share payloads and shopping entries round-trip through json") {
    const auto share = make_share(pot(), "Alex", "for dinner", 66);
    CHECK(share_from_json(to_json(share)) == share);
    CHECK_THROWS_AS(make_share(pot(), "  ", "x", 0), Error);
    ShoppingList list;
    list.add(pot(), 10);
    list.add(pot(), 20);
    CHECK(list.entries().size() == 2);
    CHECK(shopping_entry_from_json(to_json(list.entries()[1])) == list.entries()[1]);
    WidgetBoard board;
    const auto id = board.create({7}, NoteWidget{"hi", NoteVisibility::parse("group:a")}, 0);
    CHECK(widget_from_json(to_json(board.get(id))) == board.get(id));
}

TEST_CASE("jsonl files append whole lines") {
    aor::test::TempDir dir;
    JsonlFile file(dir / "out.jsonl");
    file.append({{"a", 1}});
    file.append({{"b", 2}});
    const auto lines = aor::test::read_lines(dir / "out.jsonl");
    REQUIRE(lines.size() == 2);
    CHECK(lines[1] == R"({"b":2})");
    JsonlFile bad(dir / "missing-dir" / "x.jsonl");
    try {
        bad.append({{"a", 1}});
        FAIL("expected io error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kIo);
    }
}

}  // TEST_SUITE
