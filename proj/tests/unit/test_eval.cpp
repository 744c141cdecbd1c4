#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <set>

#include "../common/oracles.hpp"
#include "procsight/error.hpp"
#include "procsight/eval.hpp"

using namespace procsight;

namespace {

std::vector<Label> labels(std::size_t mal, std::size_t ben) {
    std::vector<Label> out(mal, Label::malicious);
    out.insert(out.end(), ben, Label::benign);
    return out;
}

RnnModel constant_model(bool malicious) {
    RnnModel m = make_model(CellKind::gru, SchemaId::event_only_5, 2);
    m.params.out_b() = malicious ? 5.0 : -5.0;
    return m;
}

FeatureSequence seq_at(std::vector<std::int64_t> times, Label label) {
    FeatureSequence s;
    s.schema = SchemaId::event_only_5;
    s.width = 5;
    s.label = label;
    for (auto t : times) {
        s.values.insert(s.values.end(), {1, 0, 0, 0, 0});
        s.times_ms.push_back(t);
    }
    return s;
}

} // namespace

TEST_CASE("metrics: closed cases") {
    auto r = metrics({1, 1, 0, 0});
    CHECK(r.accuracy == 100.0);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.f1 == 1.0);
    CHECK(r.fpr == 0.0);

    r = metrics({60, 0, 0, 40});
    CHECK(r.recall == 0.6);
    CHECK(r.fpr == 0.0);
    CHECK(r.fpr_degenerate);

    r = metrics({50, 30, 10, 10});
    CHECK(r.accuracy == 80.0);
    CHECK(r.precision == doctest::Approx(0.8333).epsilon(1e-4));
    CHECK(r.recall == doctest::Approx(0.8333).epsilon(1e-4));
    CHECK(r.f1 == doctest::Approx(0.8333).epsilon(1e-4));
    CHECK(r.fpr == 0.25);

    CHECK_THROWS_AS(metrics({}), Error);
}

TEST_CASE("metrics: brute-force recount") {
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(60);
        std::vector<Label> pred(n), actual(n);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = rng.bernoulli(0.5) ? Label::malicious : Label::benign;
            actual[i] = rng.bernoulli(0.5) ? Label::malicious : Label::benign;
        }
        const auto row = metrics(tally(pred, actual));
        const auto want = oracle::recount(pred, actual);
        CHECK(row.accuracy == want.accuracy);
        CHECK(row.precision == want.precision);
        CHECK(row.recall == want.recall);
        CHECK(row.f1 == want.f1);
        CHECK(row.fpr == want.fpr);
    }
}

TEST_CASE("split_undersample") {
    SUBCASE("525 / 900") {
        const auto l = labels(525, 900);
        const auto p = split_undersample(l, 1);
        std::size_t tm = 0, sm = 0;
        for (auto i : p.train) tm += l[i] == Label::malicious;
        for (auto i : p.test) sm += l[i] == Label::malicious;
        CHECK(tm == 420);
        CHECK(p.train.size() == 840);
        CHECK(sm == 105);
        CHECK(p.test.size() == 210);
        CHECK(p.leftover_benign.size() == 900 - 525);
    }
    SUBCASE("10 / 10") {
        const auto p = split_undersample(labels(10, 10), 3);
        CHECK(p.train.size() == 16);
        CHECK(p.test.size() == 4);
        CHECK(p.leftover_benign.empty());
    }
    SUBCASE("10 / 9") {
        try {
            split_undersample(labels(10, 9), 3);
            FAIL("expected partition error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::partition);
        }
    }
    SUBCASE("disjoint and deterministic") {
        const auto l = labels(30, 50);
        const auto a = split_undersample(l, 8), b = split_undersample(l, 8), c = split_undersample(l, 9);
        CHECK(a.train == b.train);
        CHECK(a.test == b.test);
        CHECK(a.train != c.train);
        std::set<std::size_t> seen(a.train.begin(), a.train.end());
        for (auto i : a.test) CHECK(seen.insert(i).second);
        for (auto i : a.leftover_benign) CHECK(seen.insert(i).second);
        CHECK(seen.size() == l.size());
    }
}

TEST_CASE("kfold") {
    auto sizes = [](const std::vector<Fold>& folds) {
        std::vector<std::size_t> s;
        for (const auto& f : folds) s.push_back(f.validate.size());
        return s;
    };
    CHECK(sizes(kfold(100, 10, 1)) == std::vector<std::size_t>(10, 10));
    const auto s105 = sizes(kfold(105, 10, 1));
    CHECK(std::count(s105.begin(), s105.end(), 11) == 5);
    CHECK(std::count(s105.begin(), s105.end(), 10) == 5);

    const auto folds = kfold(37, 10, 4);
    std::vector<int> hits(37, 0);
    for (const auto& f : folds) {
        for (auto i : f.validate) ++hits[i];
        CHECK(f.fit.size() + f.validate.size() == 37);
        std::set<std::size_t> fit(f.fit.begin(), f.fit.end());
        for (auto i : f.validate) CHECK(fit.count(i) == 0);
    }
    for (int h : hits) CHECK(h == 1);
}

TEST_CASE("per_second_curve: degenerate classifiers") {
    std::vector<FeatureSequence> test{seq_at({0, 1500}, Label::malicious), seq_at({200}, Label::malicious),
                                      seq_at({0, 3000}, Label::benign), seq_at({900}, Label::benign)};
    for (const auto& row : per_second_curve(constant_model(true), test, 10)) {
        CHECK(row.recall == 1.0);
        CHECK(row.fpr == 1.0);
    }
    for (const auto& row : per_second_curve(constant_model(false), test, 10)) {
        CHECK(row.recall == 0.0);
        CHECK(row.fpr == 0.0);
    }
    CHECK_THROWS_AS(per_second_curve(constant_model(true), test, 0), Error);
}

TEST_CASE("per_second_curve: late malicious activity is no-data until it starts") {
    std::vector<FeatureSequence> test;
    for (int i = 0; i < 4; ++i) test.push_back(seq_at({5200 + i * 100, 9000}, Label::malicious));
    for (int i = 0; i < 4; ++i) test.push_back(seq_at({i * 100}, Label::benign));
    const auto curve = per_second_curve(constant_model(true), test, 8);
    REQUIRE(curve.size() == 8);
    for (int t = 1; t <= 5; ++t) {
        CHECK(curve[t - 1].t == t);
        CHECK(curve[t - 1].recall == 0.0);
        CHECK(curve[t - 1].no_data_count == 4);
    }
    for (int t = 6; t <= 8; ++t) {
        CHECK(curve[t - 1].recall == 1.0);
        CHECK(curve[t - 1].no_data_count == 0);
    }
}

TEST_CASE("average_curves and repeat_experiment") {
    std::vector<MetricRow> a(3), b(3);
    for (int i = 0; i < 3; ++i) {
        a[i].t = b[i].t = i + 1;
        a[i].f1 = 0.2;
        b[i].f1 = 0.6;
        a[i].accuracy = 50;
        b[i].accuracy = 70;
    }
    const std::vector<std::vector<MetricRow>> one{a};
    CHECK(average_curves(one)[1].f1 == a[1].f1);
    const std::vector<std::vector<MetricRow>> ten(10, a);
    CHECK(average_curves(ten)[2].accuracy == doctest::Approx(50));
    const std::vector<std::vector<MetricRow>> ab{a, b};
    CHECK(average_curves(ab)[0].f1 == doctest::Approx(0.4));

    Rng rng(12);
    std::vector<FeatureSequence> samples;
    for (int i = 0; i < 24; ++i) {
        const Label l = i % 2 ? Label::malicious : Label::benign;
        std::vector<std::int64_t> times;
        for (int t = 0; t < 4; ++t) times.push_back(t * 900 + static_cast<std::int64_t>(rng.below(100)));
        FeatureSequence s = seq_at(times, l);
        if (l == Label::malicious) s.values[5 + 1] = 1, s.values[5] = 0;
        samples.push_back(s);
    }
    ExperimentConfig cfg;
    cfg.train.epochs = 3;
    cfg.train.hidden_width = 4;
    cfg.horizon = 4;
    cfg.repetitions = 1;
    cfg.master_seed = 6;
    const auto r1 = repeat_experiment(samples, cfg);
    CHECK(r1.runs.size() == 1);
    CHECK(r1.mean_curve == r1.runs[0].curve);
    cfg.repetitions = 2;
    const auto r2 = repeat_experiment(samples, cfg), r3 = repeat_experiment(samples, cfg);
    CHECK(r2.mean_curve == r3.mean_curve);
    CHECK(r2.runs[0].seed != r2.runs[1].seed);
}

TEST_CASE("compare_levels") {
    std::vector<MetricRow> m(30), p(30);
    for (int i = 0; i < 30; ++i) {
        m[i].t = p[i].t = i + 1;
        m[i].f1 = 0.80;
        p[i].f1 = 0.87;
        m[i].recall = 0.5;
        p[i].recall = 0.6;
    }
    const auto same = compare_levels(m, m);
    for (const auto& r : same.rows) CHECK((r.delta_f1 == 0 && r.delta_recall == 0 && r.delta_fpr == 0));
    const auto c = compare_levels(m, p);
    REQUIRE(c.rows.size() == 30);
    for (const auto& r : c.rows) CHECK(r.delta_f1 == doctest::Approx(0.07));
    CHECK(c.mean_delta_recall == doctest::Approx(0.1));

    std::vector<MetricRow> late(2);
    late[0].t = 40;
    late[1].t = 41;
    try {
        compare_levels(m, late);
        FAIL("expected range error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::range);
    }
}

TEST_CASE("report csv round trip") {
    std::vector<MetricRow> rows(2);
    rows[0] = metrics({3, 4, 1, 2});
    rows[0].t = 1;
    rows[0].no_data_count = 2;
    rows[1] = metrics({5, 5, 0, 0});
    rows[1].t = 2;
    const auto path = (std::filesystem::temp_directory_path() / "procsight_report_test.csv").string();
    write_report_csv(path, rows, ArtifactStamp{"cafe", 1, 1});
    const auto back = read_report_csv(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].t == 1);
    CHECK(back[0].f1 == doctest::Approx(rows[0].f1).epsilon(1e-6));
    CHECK(back[0].no_data_count == 2);
    CHECK(back[1].accuracy == 100.0);
    CHECK(report_csv(rows, ArtifactStamp{"cafe", 1, 1}) == report_csv(rows, ArtifactStamp{"cafe", 1, 1}));
    std::filesystem::remove(path);
}
