#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "procsight/campaign.hpp"
#include "procsight/error.hpp"
#include "procsight/ingest.hpp"
#include "procsight/rng.hpp"

using namespace procsight;

namespace {

const Timestamp kT0 = parse_timestamp("2023-01-01 00:00:00.000");

SysmonEvent ev(int id, std::string guid, std::int64_t ms, std::string machine = "W7-1", std::int64_t pid = 404) {
    SysmonEvent e;
    e.event_id = id;
    e.process_guid = std::move(guid);
    e.machine = std::move(machine);
    e.utc_time = kT0 + Millis{ms};
    e.attributes["ProcessId"] = std::to_string(pid);
    return e;
}

std::vector<int> ids(const std::vector<SysmonEvent>& events) {
    std::vector<int> out;
    for (const auto& e : events) out.push_back(e.event_id);
    return out;
}

HollowsReport report_at(std::int64_t pid, std::string machine, std::int64_t ms, std::int64_t implanted_pe = 1) {
    HollowsReport r;
    r.pid = pid;
    r.machine = std::move(machine);
    r.scan_time = kT0 + Millis{ms};
    r.implanted_pe = implanted_pe;
    return r;
}

} // namespace

TEST_CASE("parse: process creation maps fields directly") {
    const auto e = parse_event_line(
        R"({"EventID":1,"Computer":"W7-1","ProcessGuid":"G1","UtcTime":"2023-01-01 00:00:00.000","ProcessId":"404","Image":"C:\\a.exe"})");
    CHECK(e.event_id == 1);
    CHECK(e.process_guid == "G1");
    CHECK(e.machine == "W7-1");
    CHECK(e.utc_time == kT0);
    CHECK(e.process_id() == 404);
    CHECK(e.attributes.at("Image") == "C:\\a.exe");
    CHECK(!e.event_type);
}

TEST_CASE("parse: nested evtx layout") {
    const auto e = parse_event_line(
        R"({"Event":{"System":{"EventID":13,"Computer":"W7-1"},"EventData":{"ProcessGuid":"G1","UtcTime":"2023-01-01 00:00:01.250","EventType":"SetValue"}}})");
    CHECK(e.event_id == 13);
    REQUIRE(e.event_type);
    CHECK(*e.event_type == "SetValue");
    CHECK(e.utc_time == kT0 + Millis{1250});
}

TEST_CASE("parse: errors") {
    CHECK_THROWS_AS(parse_event_line(R"({"EventID": 1})"), Error);
    try {
        parse_event_line(R"({"EventID": 1})");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::schema);
    }
    try {
        parse_event_line(R"({"EventID": 1, "Computer": )");
        FAIL("expected parse error");
    } catch (const ParseError& e) {
        CHECK(e.kind() == ErrorKind::parse);
        CHECK(e.byte_offset() > 0);
    }
    try {
        parse_event_line(R"({"EventID":4688,"Computer":"W","ProcessGuid":"G","UtcTime":"2023-01-01 00:00:00.000"})");
        FAIL("expected unsupported");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::unsupported);
    }
}

TEST_CASE("parse: json line round trip") {
    SysmonEvent e = ev(12, "{G-1}", 3456);
    e.event_type = "DeleteValue";
    e.attributes["TargetObject"] = "HKLM\\x";
    CHECK(parse_event_line(event_to_json_line(e)) == e);
    const HollowsReport r = report_at(7, "W", 100, 3);
    CHECK(parse_hollows_line(hollows_to_json_line(r)) == r);
}

TEST_CASE("filter_events") {
    CHECK(ids(filter_events({ev(1, "a", 0), ev(22, "a", 1), ev(3, "a", 2)})) == std::vector<int>{1, 3});
    CHECK(filter_events({}).empty());
    CHECK(filter_events({ev(7, "a", 0), ev(11, "a", 1)}).empty());
    CHECK(ids(filter_events({ev(5, "a", 0), ev(12, "a", 1), ev(13, "a", 2), ev(2, "a", 3)})) ==
          std::vector<int>{5, 12, 13});
}

TEST_CASE("resolve_guid_collisions") {
    const std::string bad = "{5770385f-0000-0000-3e00-000000000f00}";
    CHECK(is_degenerate_guid(bad));
    CHECK_FALSE(is_degenerate_guid("{5770385f-c22a-43e0-bf4c-06f5698ffbd9}"));

    SUBCASE("different machines") {
        const auto r = resolve_guid_collisions({ev(1, bad, 0, "W7-1"), ev(1, bad, 0, "W7-2")});
        CHECK(r.events[0].process_guid != r.events[1].process_guid);
        CHECK(r.rewritten == 2);
    }
    SUBCASE("well-formed guid unchanged") {
        const std::vector<SysmonEvent> in{ev(1, "{5770385f-c22a-43e0-bf4c-06f5698ffbd9}", 0)};
        const auto r = resolve_guid_collisions(in);
        CHECK(r.events == in);
        CHECK(r.rewritten == 0);
    }
    SUBCASE("same machine, 90 s apart") {
        // 100 s lands the first in bucket 0 and the second in bucket 1 of 120 s
        const auto r = resolve_guid_collisions({ev(1, bad, 100'000), ev(1, bad, 190'000)});
        CHECK(r.events[0].process_guid != r.events[1].process_guid);
        // and inside one bucket the second creation still opens a new instance
        const auto r2 = resolve_guid_collisions({ev(1, bad, 1'000), ev(1, bad, 91'000)});
        CHECK(r2.events[0].process_guid != r2.events[1].process_guid);
    }
    SUBCASE("follow-up events join their creation") {
        const auto r = resolve_guid_collisions({ev(1, bad, 0), ev(3, bad, 500), ev(1, bad, 90'000), ev(13, bad, 90'500)});
        CHECK(r.events[0].process_guid == r.events[1].process_guid);
        CHECK(r.events[2].process_guid == r.events[3].process_guid);
        CHECK(r.events[0].process_guid != r.events[2].process_guid);
    }
}

TEST_CASE("correlate: ordering and grouping") {
    const auto acts = correlate({ev(3, "G1", 2000), ev(1, "G1", 0), ev(13, "G1", 1000)});
    REQUIRE(acts.size() == 1);
    CHECK(ids(acts[0].events) == std::vector<int>{1, 13, 3});
    CHECK(acts[0].origin_time == kT0);
    CHECK_FALSE(acts[0].orphan);

    const auto two = correlate({ev(1, "G1", 0), ev(1, "G2", 10), ev(3, "G1", 20), ev(3, "G2", 30), ev(5, "G2", 40)});
    REQUIRE(two.size() == 2);
    CHECK(two[0].process_guid == "G1");
    CHECK(two[0].events.size() == 2);
    CHECK(two[1].events.size() == 3);
    for (const auto& e : two[1].events) CHECK(e.process_guid == "G2");

    const auto orphan = correlate({ev(3, "G9", 0)});
    CHECK(orphan[0].orphan);
}

TEST_CASE("correlate: 1000 shuffled events over 50 guids match generator ground truth") {
    Rng rng(2024);
    const ProfileMix mix = default_malicious_mix();
    std::vector<ProcessActivity> truth;
    for (int i = 0; i < 50; ++i) {
        ProcessProfile p = mix.presets[i % mix.presets.size()];
        p.event_rate = 0.3;
        p.termination_prob = 0;
        ProcessContext ctx;
        ctx.machine = machine_name(i % 5);
        ctx.process_guid = "{g-" + std::to_string(i) + "}";
        ctx.pid = 1000 + i;
        ctx.origin = kT0 + Millis{rng.between(0, 800)};
        ctx.window_end = ctx.origin + Millis{120'000};
        truth.push_back(generate_process_events(p, Label::malicious, rng, ctx).activity);
    }
    std::size_t total = 0;
    for (const auto& a : truth) total += a.events.size();
    REQUIRE(total >= 1000);
    // trim the longest tails until exactly 1000 remain
    while (total > 1000) {
        auto it = std::max_element(truth.begin(), truth.end(),
                                   [](const auto& a, const auto& b) { return a.events.size() < b.events.size(); });
        it->events.pop_back();
        --total;
    }
    std::vector<SysmonEvent> log;
    for (const auto& a : truth)
        for (const auto& e : a.events) log.push_back(e);
    rng.shuffle(std::span<SysmonEvent>(log));

    const auto rebuilt = correlate(log);
    REQUIRE(rebuilt.size() == 50);
    std::map<std::string, const ProcessActivity*> by_guid;
    for (const auto& a : truth) by_guid[a.process_guid] = &a;
    for (const auto& a : rebuilt) {
        REQUIRE(by_guid.count(a.process_guid));
        const ProcessActivity& t = *by_guid[a.process_guid];
        CHECK(a.events == t.events);
        CHECK(a.origin_time == t.origin_time);
        CHECK(a.machine == t.machine);
    }
}

TEST_CASE("attach_hollows") {
    auto base = correlate({ev(1, "G1", 0, "W7-1", 404), ev(3, "G1", 500, "W7-1", 404)});
    SUBCASE("match inside window") {
        const auto j = attach_hollows(base, {report_at(404, "W7-1", 5000)}, Millis{120'000});
        REQUIRE(j.activities[0].hollows);
        CHECK(j.activities[0].hollows->implanted_pe == 1);
        CHECK(j.unmatched.empty());
    }
    SUBCASE("machine mismatch") {
        const auto j = attach_hollows(base, {report_at(404, "W7-2", 5000)}, Millis{120'000});
        CHECK_FALSE(j.activities[0].hollows);
        CHECK(j.unmatched.size() == 1);
    }
    SUBCASE("closest wins") {
        const auto j = attach_hollows(base, {report_at(404, "W7-1", 80'000, 2), report_at(404, "W7-1", 5000, 1)},
                                      Millis{120'000});
        REQUIRE(j.activities[0].hollows);
        CHECK(j.activities[0].hollows->scan_time == kT0 + Millis{5000});
    }
    SUBCASE("outside window") {
        const auto j = attach_hollows(base, {report_at(404, "W7-1", 121'000)}, Millis{120'000});
        CHECK_FALSE(j.activities[0].hollows);
    }
}

TEST_CASE("activity store round trip") {
    auto acts = attach_hollows(correlate({ev(1, "G1", 0), ev(13, "G1", 10), ev(1, "G2", 5, "W7-2", 9)}),
                               {report_at(404, "W7-1", 100)}, Millis{120'000})
                    .activities;
    acts[0].label = Label::malicious;
    acts[1].label = Label::benign;
    const auto path = (std::filesystem::temp_directory_path() / "procsight_store_test.jsonl").string();
    write_activity_store(path, acts, ArtifactStamp{"abc", 5, 1});
    CHECK(read_activity_store(path) == acts);
    std::filesystem::remove(path);
}
