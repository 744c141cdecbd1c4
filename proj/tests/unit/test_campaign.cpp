#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "procsight/campaign.hpp"
#include "procsight/error.hpp"
#include "procsight/eval.hpp"
#include "procsight/pipeline.hpp"

using namespace procsight;
namespace fs = std::filesystem;

namespace {

const Timestamp kT0 = parse_timestamp("2023-03-01 09:00:00.000");

ProcessContext context(std::string guid, std::int64_t pid = 500) {
    ProcessContext c;
    c.machine = "DESKTOP-VM1";
    c.process_guid = std::move(guid);
    c.pid = pid;
    c.origin = kT0;
    c.window_end = kT0 + Millis{120'000};
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace

TEST_CASE("draw_malware_count") {
    Rng rng(1);
    const std::vector<std::size_t> three{0, 0, 0}, two{0, 0}, mixed{0, 0, 0, 1, 0, 0};
    std::set<std::size_t> seen_forced, seen_free;
    for (int i = 0; i < 500; ++i) {
        const auto f = draw_malware_count(rng, three);
        CHECK(f >= 1);
        CHECK(f <= 2);
        seen_forced.insert(f);
        seen_free.insert(draw_malware_count(rng, two));
        CHECK(draw_malware_count(rng, mixed) <= 2);
    }
    CHECK(seen_forced == std::set<std::size_t>{1, 2});
    CHECK(seen_free == std::set<std::size_t>{0, 1, 2});

    std::array<int, 3> freq{};
    for (int i = 0; i < 10'000; ++i) ++freq[draw_malware_count(rng, {}, 2, false)];
    for (int f : freq) CHECK(std::abs(f / 10'000.0 - 1.0 / 3.0) <= 0.02);
}

TEST_CASE("schedule_campaign") {
    SUBCASE("every malicious sample exactly once") {
        CampaignConfig cfg;
        cfg.n_malicious = 200;
        cfg.n_benign = 200;
        const auto plans = schedule_campaign(cfg);
        std::map<std::string, int> count;
        std::size_t run = 0;
        for (const auto& p : plans) {
            REQUIRE(p.assignments.size() == 5);
            std::size_t m = 0;
            for (std::size_t v = 0; v < 5; ++v) {
                CHECK(p.assignments[v].vm == v);
                if (p.assignments[v].label == Label::malicious) ++count[p.assignments[v].sample_id], ++m;
            }
            CHECK(m == p.malware_count);
            CHECK(m <= 2);
            run = m == 0 ? run + 1 : 0;
            CHECK(run < 4);
        }
        CHECK(count.size() == 200);
        for (const auto& [id, n] : count) CHECK(n == 1);
        CHECK(plans[1].start_time - plans[0].start_time == Millis{180'000});
    }
    SUBCASE("no malware, forced rule off") {
        CampaignConfig cfg;
        cfg.n_malicious = 0;
        cfg.n_benign = 23;
        cfg.force_nonzero = false;
        const auto plans = schedule_campaign(cfg);
        CHECK(plans.size() == 5);
        for (const auto& p : plans)
            for (const auto& a : p.assignments) CHECK(a.label == Label::benign);
    }
    SUBCASE("malware moves between VMs") {
        CampaignConfig cfg;
        cfg.n_malicious = 20;
        const auto plans = schedule_campaign(cfg);
        std::set<std::size_t> hosts;
        for (std::size_t i = 0; i < std::min<std::size_t>(20, plans.size()); ++i)
            for (const auto& a : plans[i].assignments)
                if (a.label == Label::malicious) hosts.insert(a.vm);
        CHECK(hosts.size() >= 2);
    }
    SUBCASE("benign pool smaller than VM count") {
        CampaignConfig cfg;
        cfg.n_benign = 3;
        CHECK_THROWS_AS(schedule_campaign(cfg), Error);
    }
}

TEST_CASE("generate_process_events") {
    Rng rng(5);
    SUBCASE("zero network propensity gives no id-3 events") {
        ProcessProfile p = default_benign_mix().presets[0];
        p.network_propensity = 0;
        p.event_rate = 1.0;
        for (int i = 0; i < 20; ++i) {
            const auto g = generate_process_events(p, Label::benign, rng, context("{b-" + std::to_string(i) + "}"));
            for (const auto& e : g.activity.events) CHECK(e.event_id != 3);
        }
    }
    SUBCASE("hollows probability one") {
        ProcessProfile p = default_malicious_mix().presets[0];
        p.hollows_prob = 1;
        const auto g = generate_process_events(p, Label::malicious, rng, context("{m}"));
        REQUIRE(g.activity.hollows);
        std::int64_t total = 0;
        for (auto c : g.activity.hollows->counts()) total += c;
        CHECK(total > 0);
        CHECK(g.activity.hollows->pid == 500);
    }
    SUBCASE("shape of the stream") {
        const auto g = generate_process_events(default_malicious_mix().presets[1], Label::malicious, rng,
                                               context("{shape}"));
        const auto& ev = g.activity.events;
        REQUIRE(!ev.empty());
        CHECK(ev.front().event_id == 1);
        CHECK(ev.front().utc_time == kT0);
        for (std::size_t i = 1; i < ev.size(); ++i) {
            CHECK(ev[i].utc_time > ev[i - 1].utc_time);
            CHECK(ev[i].utc_time <= kT0 + Millis{120'000});
            CHECK(is_analysis_event(ev[i].event_id));
        }
        for (const auto& e : g.filtered_noise) CHECK_FALSE(is_analysis_event(e.event_id));
        CHECK(g.activity.label == Label::malicious);
    }
}

TEST_CASE("generate_machine_series") {
    Rng rng(3);
    const auto empty = generate_machine_series({}, rng, kT0, 120);
    CHECK(empty.snapshots.size() == 120);
    CHECK(empty.label == Label::benign);
    for (std::size_t t = 0; t < 120; ++t) CHECK(empty.snapshots[t].t == static_cast<std::int64_t>(t));

    const ProcessProfile ben = default_benign_mix().presets[0], mal = default_malicious_mix().presets[0];
    const auto a = generate_process_events(ben, Label::benign, rng, context("{a}"));
    const auto b = generate_process_events(mal, Label::malicious, rng, context("{b}", 900));
    const std::vector<HostedProcess> just_benign{{&a.activity, &ben}};
    CHECK(generate_machine_series(just_benign, rng, kT0, 120).label == Label::benign);
    const std::vector<HostedProcess> both{{&a.activity, &ben}, {&b.activity, &mal}};
    const auto s = generate_machine_series(both, rng, kT0, 120);
    CHECK(s.label == Label::malicious);
    for (const auto& snap : s.snapshots) {
        CHECK(snap.cpu_user_pct + snap.cpu_system_pct <= 100.0 + 1e-9);
        CHECK(snap.cpu_user_pct >= 0);
    }
}

TEST_CASE("generate_dataset: Set-0 sized totals") {
    CampaignConfig cfg;
    cfg.n_malicious = 200;
    cfg.n_benign = 195;
    cfg.seed = 11;
    const auto data = generate_dataset(cfg);
    std::set<std::string> mal, ben;
    for (const auto& e : data.manifest) {
        if (e.background) continue;
        (e.label == Label::malicious ? mal : ben).insert(e.sample_id);
    }
    CHECK(mal.size() == 200);
    CHECK(ben.size() == 195);
    CHECK(data.windows.size() == data.plans.size() * 5);
    CHECK(data.machine_series.size() == data.windows.size());

    const fs::path dir = fs::temp_directory_path() / "procsight_set0";
    fs::remove_all(dir);
    write_campaign(dir.string(), data);
    const auto j = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(j["totals"]["malicious"] == 200);
    CHECK(j["totals"]["benign_unique"] == 195);
    const Manifest m = read_manifest((dir / "manifest.json").string());
    CHECK(m.entries.size() == data.manifest.size());
    CHECK(m.iterations == data.plans.size());
    fs::remove_all(dir);
}

TEST_CASE("generate_dataset: determinism and noise toggle") {
    CampaignConfig cfg;
    cfg.n_malicious = 12;
    cfg.n_benign = 12;
    cfg.seed = 77;
    const fs::path a = fs::temp_directory_path() / "procsight_det_a", b = fs::temp_directory_path() / "procsight_det_b";
    fs::remove_all(a);
    fs::remove_all(b);
    write_campaign(a.string(), generate_dataset(cfg), ArtifactStamp{"x", 77, 1});
    write_campaign(b.string(), generate_dataset(cfg), ArtifactStamp{"x", 77, 1});
    std::size_t files = 0;
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        ++files;
        CHECK(slurp(entry.path()) == slurp(b / fs::relative(entry.path(), a)));
    }
    CHECK(files > 3);
    fs::remove_all(a);
    fs::remove_all(b);

    cfg.background_noise = false;
    const auto quiet = generate_dataset(cfg);
    for (const auto& e : quiet.manifest) CHECK_FALSE(e.background);
    CHECK(quiet.activities.size() == quiet.plans.size() * 5);
}

TEST_CASE("degenerate guids survive ingest with labels intact") {
    CampaignConfig cfg;
    cfg.n_malicious = 15;
    cfg.n_benign = 15;
    cfg.seed = 4;
    cfg.degenerate_guid_fraction = 0.4;
    const auto data = generate_dataset(cfg);
    IngestStats stats;
    auto acts = ingest_events(data.events, data.reports, Millis{120'000}, &stats);
    CHECK(stats.guids_rewritten > 0);
    CHECK(acts.size() == data.activities.size());
    Manifest m;
    m.entries = data.manifest;
    CHECK(apply_labels(acts, m) == 0);
    std::size_t mal = 0, truth = 0;
    for (const auto& a : acts) mal += a.label == Label::malicious;
    for (const auto& a : data.activities) truth += a.label == Label::malicious;
    CHECK(mal == truth);
}

TEST_CASE("campaign config json") {
    CampaignConfig cfg;
    cfg.n_vms = 3;
    cfg.seed = 9;
    cfg.background_noise = false;
    const auto back = campaign_config_from_json(campaign_config_to_json(cfg));
    CHECK(back.n_vms == 3);
    CHECK(back.seed == 9);
    CHECK_FALSE(back.background_noise);
    CHECK(campaign_config_to_json(back) == campaign_config_to_json(cfg));
    try {
        campaign_config_from_json(R"({"n_vm": 3})");
        FAIL("expected config error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::config);
    }
    CHECK_THROWS_AS(campaign_config_from_json(R"({"n_malicious": -1})"), Error);
}

TEST_CASE("default profiles are separable: seed 7, 100 per class, F1 >= 0.8 at t=30") {
    Rng rng(7);
    const ProfileMix mal = default_malicious_mix(), ben = default_benign_mix();
    std::vector<FeatureSequence> set;
    for (int i = 0; i < 200; ++i) {
        const bool m = i < 100;
        const ProcessProfile& p = (m ? mal : ben).pick(rng);
        auto ctx = context("{s-" + std::to_string(i) + "}", 1000 + i);
        auto g = generate_process_events(p, m ? Label::malicious : Label::benign, rng, ctx);
        set.push_back(encode_complete(g.activity));
    }
    std::vector<Label> labels;
    for (const auto& s : set) labels.push_back(s.label);
    const Partition split = split_undersample(labels, 7);
    std::vector<FeatureSequence> train_set, test_set;
    for (auto i : split.train) train_set.push_back(truncate_to_horizon(set[i], 30));
    for (auto i : split.test) test_set.push_back(set[i]);
    TrainConfig tc;
    tc.seed = 7;
    const RnnModel model = fit_model(train_set, tc);
    const auto curve = per_second_curve(model, test_set, 30);
    MESSAGE("t=30 f1 " << curve.back().f1);
    CHECK(curve.back().f1 >= 0.8);
}
