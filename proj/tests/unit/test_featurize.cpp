#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "procsight/error.hpp"
#include "procsight/featurize.hpp"

using namespace procsight;
namespace col = procsight::complete_col;

namespace {

const Timestamp kT0 = parse_timestamp("2023-01-01 00:00:00.000");

SysmonEvent ev(int id, std::int64_t ms, std::map<std::string, std::string> attrs = {}) {
    SysmonEvent e;
    e.event_id = id;
    e.process_guid = "G1";
    e.machine = "W7-1";
    e.utc_time = kT0 + Millis{ms};
    e.attributes = std::move(attrs);
    return e;
}

ProcessActivity activity(std::vector<SysmonEvent> events) {
    ProcessActivity a;
    a.process_guid = "G1";
    a.machine = "W7-1";
    a.origin_time = kT0;
    a.events = std::move(events);
    a.label = Label::benign;
    return a;
}

std::vector<double> row_of(const FeatureSequence& s, std::size_t i) {
    auto r = s.row(i);
    return {r.begin(), r.end()};
}

} // namespace

TEST_CASE("schema widths and names") {
    CHECK(schema_width(SchemaId::event_only_5) == 5);
    CHECK(schema_width(SchemaId::complete_31) == 31);
    CHECK(schema_width(SchemaId::machine_10) == 10);
    CHECK(parse_schema_id("complete") == SchemaId::complete_31);
    CHECK(parse_schema_id("machine_10") == SchemaId::machine_10);
    CHECK_THROWS_AS(parse_schema_id("bogus"), Error);
    CHECK(schema_for(SchemaId::complete_31).columns[col::timestamp].name == "timestamp_ms");
    CHECK(schema_for(SchemaId::complete_31).columns[col::event_type_set].name == "EventType_SetValue");
}

TEST_CASE("relative_timestamp") {
    CHECK(relative_timestamp(ev(1, 1500), kT0) == 1500);
    CHECK(relative_timestamp(ev(1, 0), kT0) == 0);
    CHECK(relative_timestamp(ev(1, 120'000), kT0) == 120000);
    CHECK_THROWS_AS(relative_timestamp(ev(1, 0), kT0 + Millis{1}), Error);
}

TEST_CASE("encode_event_only") {
    const auto s = encode_event_only(activity({ev(1, 0), ev(3, 10), ev(13, 20)}));
    REQUIRE(s.steps() == 3);
    CHECK(row_of(s, 0) == std::vector<double>{1, 0, 0, 0, 0});
    CHECK(row_of(s, 1) == std::vector<double>{0, 1, 0, 0, 0});
    CHECK(row_of(s, 2) == std::vector<double>{0, 0, 0, 0, 1});
    CHECK(s.times_ms == std::vector<std::int64_t>{0, 10, 20});
    for (std::size_t i = 0; i < s.steps(); ++i) {
        double sum = 0;
        for (double v : s.row(i)) sum += v;
        CHECK(sum == 1.0);
    }
}

TEST_CASE("encode_complete: network event by hand") {
    const auto s = encode_complete(activity(
        {ev(3, 2000, {{"Protocol", "tcp"}, {"DestinationPortName", "https"}, {"IntegrityLevel", "Medium"}})}));
    std::vector<double> expect(31, 0.0);
    expect[15] = 1; // Protocol_tcp
    expect[17] = 1; // DPortName_https
    expect[21] = 1; // IntegrityLevel_Medium
    expect[24] = 1; // EventID_3
    expect[30] = 2000;
    CHECK(row_of(s, 0) == expect);
}

TEST_CASE("encode_complete: registry SetValue has N/A network columns") {
    auto e = ev(13, 50);
    e.event_type = "SetValue";
    const auto r = row_of(encode_complete(activity({e})), 0);
    CHECK(r[col::event_type_set] == 1);
    CHECK(r[col::event_type_delete] == 0);
    for (std::size_t c = col::protocol_udp; c <= col::dport_other; ++c) CHECK(r[c] == 0);
    CHECK(r[col::event_id_first + 4] == 1);
}

TEST_CASE("encode_complete: hollows repeated over the series") {
    auto a = activity({ev(1, 0), ev(3, 10), ev(5, 20)});
    HollowsReport h;
    h.implanted_pe = 1;
    a.hollows = h;
    const auto s = encode_complete(a);
    REQUIRE(s.steps() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(s.row(i)[9] == 1);
        for (std::size_t c = 0; c < 9; ++c) CHECK(s.row(i)[c] == 0);
    }
}

TEST_CASE("encode_complete: creation attributes and scaling") {
    const auto s = encode_complete(
        activity({ev(1, 0, {{"Signed", "false"}, {"SignatureStatus", "Expired"}, {"SameImageLoaded", "true"},
                            {"IntegrityLevel", "System"}}),
                  ev(1, 6000, {{"Signed", "true"}, {"SignatureStatus", "Valid"}})}),
        EncodeOptions{true});
    CHECK(s.row(0)[col::signed_failed] == 1);
    CHECK(s.row(0)[col::signed_flag] == 0);
    CHECK(s.row(0)[col::signature_status] == 0);
    CHECK(s.row(0)[col::same_image_loaded] == 1);
    CHECK(s.row(0)[col::integrity_first + 3] == 1);
    CHECK(s.row(1)[col::signed_flag] == 1);
    CHECK(s.row(1)[col::signature_status] == 1);
    CHECK(s.row(1)[col::timestamp] == 6000.0 / 120000.0);
    CHECK(s.times_ms[1] == 6000);
}

TEST_CASE("encode_machine") {
    MachineSeries series;
    series.label = Label::malicious;
    MachineSnapshot snap;
    snap.cpu_system_pct = 1;
    snap.cpu_user_pct = 60;
    snap.mem_used = 3;
    snap.swap_used = 4;
    snap.total_procs = 5;
    snap.max_pid = 6;
    snap.bytes_sent = 7;
    snap.bytes_recv = 8;
    snap.pkts_sent = 9;
    snap.pkts_recv = 10;
    series.snapshots.push_back(snap);

    const auto raw = encode_machine(series);
    CHECK(row_of(raw, 0) == std::vector<double>{1, 60, 3, 4, 5, 6, 7, 8, 9, 10});
    CHECK(raw.label == Label::malicious);

    NormalizationStats stats;
    stats.mean.assign(10, 0.0);
    stats.stddev.assign(10, 1.0);
    stats.mean[1] = 50;
    stats.stddev[1] = 10;
    CHECK(encode_machine(series, &stats).row(0)[1] == 1.0);

    MachineSeries long_series;
    for (int t = 0; t < 120; ++t) {
        MachineSnapshot s2;
        s2.t = t;
        long_series.snapshots.push_back(s2);
    }
    const auto seq = encode_machine(long_series);
    CHECK(seq.steps() == 120);
    CHECK(seq.values.size() == 1200);
    CHECK(truncate_to_horizon(seq, 1).steps() == 1);
}

TEST_CASE("truncate_to_horizon") {
    const auto s = encode_event_only(activity({ev(1, 500), ev(3, 1500), ev(3, 2500)}));
    // origin is kT0, so times are 500/1500/2500
    const auto t2 = truncate_to_horizon(s, 2);
    CHECK(t2.steps() == 2);
    CHECK(t2.times_ms == std::vector<std::int64_t>{500, 1500});
    CHECK(truncate_to_horizon(s, 200) == s);
    CHECK_THROWS_AS(truncate_to_horizon(s, 0), Error);
    // boundary: exactly t*1000 is visible
    const auto b = encode_event_only(activity({ev(1, 0), ev(3, 1000), ev(3, 1001)}));
    CHECK(truncate_to_horizon(b, 1).steps() == 2);
}

TEST_CASE("normalization: population statistics, constant columns pass through") {
    FeatureSequence a;
    a.schema = SchemaId::machine_10;
    a.width = 10;
    for (int t = 0; t < 4; ++t) {
        for (int c = 0; c < 10; ++c) a.values.push_back(c == 0 ? t : 7.0);
        a.times_ms.push_back(t * 1000);
    }
    const auto stats = compute_normalization(std::span<const FeatureSequence>(&a, 1));
    CHECK(stats.mean[0] == doctest::Approx(1.5));
    CHECK(stats.stddev[0] == doctest::Approx(std::sqrt(1.25)));
    CHECK(stats.stddev[1] == 0.0);
    FeatureSequence b = a;
    standardize(b, stats);
    CHECK(b.row(0)[0] == doctest::Approx(-1.5 / std::sqrt(1.25)));
    CHECK(b.row(2)[1] == 0.0);
    destandardize(b, stats);
    for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(b.values[i] == doctest::Approx(a.values[i]));
}

TEST_CASE("matrix file and machine csv round trip") {
    const auto dir = std::filesystem::temp_directory_path();
    MatrixFile m;
    m.schema = SchemaId::complete_31;
    auto e = ev(13, 50);
    e.event_type = "DeleteValue";
    auto act = activity({ev(1, 0, {{"IntegrityLevel", "High"}}), e});
    act.label = Label::malicious;
    m.sequences.push_back(encode_complete(act));
    m.sequences.back().source_id = "G1";
    m.stamp = ArtifactStamp{"h", 3, 1};
    const auto path = (dir / "procsight_matrix_test.jsonl").string();
    write_matrix_file(path, m);
    const MatrixFile back = read_matrix_file(path);
    CHECK(back.schema == m.schema);
    CHECK(back.sequences == m.sequences);
    CHECK(back.stamp.seed == 3);
    std::filesystem::remove(path);

    MachineSeries series;
    series.machine = "DESKTOP-VM1";
    series.window_id = "iter0000-vm0";
    series.label = Label::benign;
    for (int t = 0; t < 3; ++t) {
        MachineSnapshot s;
        s.t = t;
        s.cpu_user_pct = 0.1 * t + 1.0 / 3.0;
        s.bytes_sent = 1e6 + t;
        series.snapshots.push_back(s);
    }
    const auto csv = (dir / "procsight_machine_test.csv").string();
    write_machine_csv(csv, series);
    const MachineSeries rb = read_machine_csv(csv);
    CHECK(rb.snapshots == series.snapshots);
    CHECK(rb.label == series.label);
    std::filesystem::remove(csv);
}
