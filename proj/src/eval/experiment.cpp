#include <algorithm>
#include <cstdio>
#include <sstream>

#include "../io/json_util.hpp"
#include "procsight/error.hpp"
#include "procsight/eval.hpp"
#include "procsight/rng.hpp"

namespace procsight {

FeatureSequence prepare_for_model(const RnnModel& model, const FeatureSequence& raw) {
    if (model.normalization.empty()) return raw;
    FeatureSequence seq = raw;
    standardize(seq, model.normalization);
    return seq;
}

std::vector<MetricRow> per_second_curve(const RnnModel& model, std::span<const FeatureSequence> testset,
                                        std::int64_t horizon) {
    require(horizon >= 1, ErrorKind::precondition, "horizon must be >= 1");
    for (const FeatureSequence& s : testset)
        if (s.schema != model.schema)
            fail(ErrorKind::schema, std::string("test sequence schema ") + to_string(s.schema) +
                                        " does not match model schema " + to_string(model.schema));

    std::vector<FeatureSequence> prepared;
    prepared.reserve(testset.size());
    std::vector<Label> actual;
    for (const FeatureSequence& s : testset) {
        prepared.push_back(prepare_for_model(model, s));
        actual.push_back(s.label);
    }

    std::vector<MetricRow> rows;
    std::vector<Label> predicted(prepared.size());
    for (std::int64_t t = 1; t <= horizon; ++t) {
        std::size_t no_data = 0;
        for (std::size_t i = 0; i < prepared.size(); ++i) {
            const FeatureSequence visible = truncate_to_horizon(prepared[i], t);
            if (visible.empty()) {
                predicted[i] = Label::benign;
                ++no_data;
            } else {
                predicted[i] = classify(model, visible);
            }
        }
        MetricRow row = metrics(tally(predicted, actual));
        row.t = t;
        row.no_data_count = static_cast<double>(no_data);
        rows.push_back(row);
    }
    return rows;
}

RnnModel fit_model(std::vector<FeatureSequence> train_set, const TrainConfig& config, std::vector<double>* loss_trace) {
    require(!train_set.empty(), ErrorKind::precondition, "training set is empty");
    NormalizationStats stats;
    if (train_set.front().schema == SchemaId::machine_10) {
        stats = compute_normalization(train_set);
        for (FeatureSequence& s : train_set) standardize(s, stats);
    }
    TrainResult result = train(train_set, config);
    result.model.normalization = std::move(stats);
    if (loss_trace) *loss_trace = std::move(result.loss_trace);
    return std::move(result.model);
}

namespace {

std::vector<FeatureSequence> gather(std::span<const FeatureSequence> samples, std::span<const std::size_t> idx,
                                    std::int64_t train_horizon) {
    std::vector<FeatureSequence> out;
    out.reserve(idx.size());
    for (const std::size_t i : idx) {
        FeatureSequence s = train_horizon > 0 ? truncate_to_horizon(samples[i], train_horizon) : samples[i];
        if (!s.empty()) out.push_back(std::move(s));
    }
    return out;
}

RnnModel fit(std::vector<FeatureSequence> train_set, const ExperimentConfig& config, std::uint64_t seed,
             std::vector<double>* loss_trace) {
    TrainConfig tc = config.train;
    tc.seed = seed;
    return fit_model(std::move(train_set), tc, loss_trace);
}

double accuracy_on(const RnnModel& model, std::span<const FeatureSequence> set) {
    std::vector<Label> predicted, actual;
    for (const FeatureSequence& s : set) {
        predicted.push_back(classify(model, prepare_for_model(model, s)));
        actual.push_back(s.label);
    }
    return metrics(tally(predicted, actual)).accuracy;
}

} // namespace

RunRecord run_split(std::span<const FeatureSequence> samples, const Partition& split, const ExperimentConfig& config,
                    std::uint64_t run_seed) {
    for (const FeatureSequence& s : samples)
        if (s.schema != config.schema)
            fail(ErrorKind::schema, std::string("sample schema ") + to_string(s.schema) +
                                        " does not match experiment schema " + to_string(config.schema));
    RunRecord rec;
    rec.seed = run_seed;
    std::vector<FeatureSequence> train_set = gather(samples, split.train, config.train_horizon_secs);
    rec.train_size = train_set.size();

    if (config.cv_folds > 0) {
        const auto folds = kfold(train_set.size(), config.cv_folds, derive_seed(run_seed, 2));
        double acc = 0;
        for (std::size_t f = 0; f < folds.size(); ++f) {
            std::vector<FeatureSequence> fit_set, val_set;
            for (std::size_t i : folds[f].fit) fit_set.push_back(train_set[i]);
            for (std::size_t i : folds[f].validate) val_set.push_back(train_set[i]);
            const RnnModel m = fit(std::move(fit_set), config, derive_seed(run_seed, 10 + f), nullptr);
            acc += accuracy_on(m, val_set);
        }
        rec.cv_accuracy = acc / static_cast<double>(folds.size());
    }

    const RnnModel model = fit(std::move(train_set), config, derive_seed(run_seed, 1), &rec.loss_trace);
    std::vector<FeatureSequence> test_set;
    for (const std::size_t i : split.test) test_set.push_back(samples[i]);
    rec.test_size = test_set.size();
    rec.curve = per_second_curve(model, test_set, config.horizon);
    return rec;
}

ExperimentResult repeat_experiment(std::span<const FeatureSequence> samples, const ExperimentConfig& config) {
    require(config.repetitions >= 1, ErrorKind::precondition, "repetitions must be >= 1");
    std::vector<Label> labels;
    labels.reserve(samples.size());
    for (const FeatureSequence& s : samples) labels.push_back(s.label);

    ExperimentResult result;
    for (std::size_t run = 0; run < config.repetitions; ++run) {
        const std::uint64_t run_seed = derive_seed(config.master_seed, run);
        try {
            const Partition split = split_undersample(labels, derive_seed(run_seed, 0), config.train_fraction);
            RunRecord rec = run_split(samples, split, config, run_seed);
            rec.run = run;
            result.runs.push_back(std::move(rec));
        } catch (const NumericError& e) {
            throw NumericError("run " + std::to_string(run) + ": " + e.what(), e.step());
        } catch (const Error& e) {
            throw Error(e.kind(), "run " + std::to_string(run) + ": " + e.what());
        }
    }
    std::vector<std::vector<MetricRow>> curves;
    for (const RunRecord& r : result.runs) curves.push_back(r.curve);
    result.mean_curve = average_curves(curves);
    return result;
}

std::vector<MetricRow> average_curves(std::span<const std::vector<MetricRow>> curves) {
    require(!curves.empty(), ErrorKind::precondition, "average of zero curves");
    const std::size_t len = curves.front().size();
    for (const auto& c : curves) require(c.size() == len, ErrorKind::shape, "curves differ in length");
    const auto count = static_cast<double>(curves.size());
    std::vector<MetricRow> mean(len);
    for (std::size_t i = 0; i < len; ++i) {
        MetricRow& m = mean[i];
        m.t = curves.front()[i].t;
        double n = 0;
        for (const auto& c : curves) {
            require(c[i].t == m.t, ErrorKind::shape, "curves differ in time steps");
            m.accuracy += c[i].accuracy;
            m.precision += c[i].precision;
            m.recall += c[i].recall;
            m.f1 += c[i].f1;
            m.fpr += c[i].fpr;
            m.no_data_count += c[i].no_data_count;
            n += static_cast<double>(c[i].n);
            m.precision_degenerate = m.precision_degenerate || c[i].precision_degenerate;
            m.recall_degenerate = m.recall_degenerate || c[i].recall_degenerate;
            m.fpr_degenerate = m.fpr_degenerate || c[i].fpr_degenerate;
        }
        m.accuracy /= count;
        m.precision /= count;
        m.recall /= count;
        m.f1 /= count;
        m.fpr /= count;
        m.no_data_count /= count;
        m.n = static_cast<std::size_t>(n / count + 0.5);
    }
    return mean;
}

ComparisonReport compare_levels(std::span<const MetricRow> machine, std::span<const MetricRow> process) {
    ComparisonReport report;
    for (const MetricRow& p : process) {
        const auto it = std::find_if(machine.begin(), machine.end(), [&](const MetricRow& m) { return m.t == p.t; });
        if (it == machine.end()) continue;
        ComparisonRow row;
        row.t = p.t;
        row.f1_machine = it->f1;
        row.f1_process = p.f1;
        row.delta_f1 = p.f1 - it->f1;
        row.recall_machine = it->recall;
        row.recall_process = p.recall;
        row.delta_recall = p.recall - it->recall;
        row.fpr_machine = it->fpr;
        row.fpr_process = p.fpr;
        row.delta_fpr = p.fpr - it->fpr;
        report.rows.push_back(row);
    }
    if (report.rows.empty()) fail(ErrorKind::range, "machine and process curves share no time step");
    for (const ComparisonRow& r : report.rows) {
        report.mean_delta_f1 += r.delta_f1;
        report.mean_delta_recall += r.delta_recall;
        report.max_fpr_machine = std::max(report.max_fpr_machine, r.fpr_machine);
        report.max_fpr_process = std::max(report.max_fpr_process, r.fpr_process);
    }
    report.mean_delta_f1 /= static_cast<double>(report.rows.size());
    report.mean_delta_recall /= static_cast<double>(report.rows.size());
    return report;
}

// ---------------------------------------------------------------------------

namespace {
constexpr const char* kReportHeader = "t,n,accuracy,precision,recall,f1,fpr,no_data_count";
}

std::string report_csv(std::span<const MetricRow> rows, const ArtifactStamp& stamp) {
    std::string out = "# procsight report format_version=" + std::to_string(stamp.format_version) +
                      " config_hash=" + (stamp.config_hash.empty() ? "-" : stamp.config_hash) +
                      " seed=" + std::to_string(stamp.seed) + "\n";
    out += kReportHeader;
    out += '\n';
    char buf[256];
    for (const MetricRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%lld,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", static_cast<long long>(r.t), r.n,
                      r.accuracy, r.precision, r.recall, r.f1, r.fpr, r.no_data_count);
        out += buf;
    }
    return out;
}

void write_report_csv(const std::string& path, std::span<const MetricRow> rows, const ArtifactStamp& stamp) {
    detail::atomic_write(path, report_csv(rows, stamp));
}

std::vector<MetricRow> read_report_csv(const std::string& path) {
    std::vector<MetricRow> rows;
    bool header = false;
    std::size_t line_no = 0;
    for (const std::string& line : detail::read_lines(path)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != kReportHeader) fail(ErrorKind::schema, "'" + path + "': unexpected report header");
            header = true;
            continue;
        }
        MetricRow r;
        long long t = 0;
        if (std::sscanf(line.c_str(), "%lld,%zu,%lf,%lf,%lf,%lf,%lf,%lf", &t, &r.n, &r.accuracy, &r.precision,
                        &r.recall, &r.f1, &r.fpr, &r.no_data_count) != 8)
            fail(ErrorKind::schema, path + ":" + std::to_string(line_no) + ": malformed report row");
        r.t = t;
        rows.push_back(r);
    }
    if (!header) fail(ErrorKind::schema, "'" + path + "': missing report header");
    return rows;
}

std::string comparison_csv(const ComparisonReport& report) {
    std::string out =
        "t,f1_machine,f1_process,delta_f1,recall_machine,recall_process,delta_recall,fpr_machine,fpr_process,"
        "delta_fpr\n";
    char buf[320];
    for (const ComparisonRow& r : report.rows) {
        std::snprintf(buf, sizeof buf, "%lld,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                      static_cast<long long>(r.t), r.f1_machine, r.f1_process, r.delta_f1, r.recall_machine,
                      r.recall_process, r.delta_recall, r.fpr_machine, r.fpr_process, r.delta_fpr);
        out += buf;
    }
    std::snprintf(buf, sizeof buf,
                  "# mean_delta_f1=%.6f mean_delta_recall=%.6f max_fpr_machine=%.6f max_fpr_process=%.6f\n",
                  report.mean_delta_f1, report.mean_delta_recall, report.max_fpr_machine, report.max_fpr_process);
    out += buf;
    return out;
}

void write_comparison_csv(const std::string& path, const ComparisonReport& report) {
    detail::atomic_write(path, comparison_csv(report));
}

} // namespace procsight
