#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "procsight/featurize.hpp"
#include "procsight/rnn.hpp"
#include "procsight/stamp.hpp"

namespace procsight {

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
    bool operator==(const ConfusionCounts&) const = default;
};

/// Tallies (predicted, actual) pairs; labels must be benign or malicious.
ConfusionCounts tally(std::span<const Label> predicted, std::span<const Label> actual);

struct MetricRow {
    std::int64_t t = 0;
    double accuracy = 0;  // percent
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    double fpr = 0;
    std::size_t n = 0;
    double no_data_count = 0; // samples with no rows by t, scored benign
    /// Sub-metrics whose denominator was zero (reported as 0).
    bool precision_degenerate = false;
    bool recall_degenerate = false;
    bool fpr_degenerate = false;

    bool operator==(const MetricRow&) const = default;
};

/// Accuracy (percent), precision, recall, F1 and FPR = FP/(FP+TN).
/// Throws Error(precondition) on an empty confusion.
MetricRow metrics(const ConfusionCounts& c);

// ---------------------------------------------------------------------------
// Partitioning

struct Partition {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::vector<std::size_t> leftover_benign;
};

/// Splits malicious indices train_fraction : rest at random, then draws equal
/// numbers of benign samples for train and for test (without replacement).
/// Throws Error(partition) when the benign pool cannot balance both sides.
Partition split_undersample(std::span<const Label> labels, std::uint64_t seed, double train_fraction = 0.8);

struct Fold {
    std::vector<std::size_t> fit;
    std::vector<std::size_t> validate;
};

/// k disjoint folds over [0, n); the first n % k folds hold one extra item.
std::vector<Fold> kfold(std::size_t n, std::size_t k, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Per-second evaluation

/// Applies the model's stored normalization (machine models) to a raw sequence.
FeatureSequence prepare_for_model(const RnnModel& model, const FeatureSequence& raw);

/// Trains on raw sequences; machine-schema sets are standardized with
/// statistics from this set, which are stored in the model.
RnnModel fit_model(std::vector<FeatureSequence> train_set, const TrainConfig& config,
                   std::vector<double>* loss_trace = nullptr);

/// For t = 1..horizon: truncate every test sequence to t, classify, tally.
/// Sequences empty after truncation are scored benign and counted in
/// no_data_count. Test sequences are raw; the model's normalization is applied.
std::vector<MetricRow> per_second_curve(const RnnModel& model, std::span<const FeatureSequence> testset,
                                        std::int64_t horizon);

struct ExperimentConfig {
    SchemaId schema = SchemaId::event_only_5;
    TrainConfig train;
    std::int64_t horizon = 30;
    std::size_t repetitions = 10;
    std::uint64_t master_seed = 0;
    double train_fraction = 0.8;
    /// When > 0, k-fold cross-validation on each training split; mean
    /// validation accuracy is recorded in the run.
    std::size_t cv_folds = 0;
    /// Training sequences are truncated to this many seconds (0 keeps all).
    std::int64_t train_horizon_secs = 0;
};

struct RunRecord {
    std::size_t run = 0;
    std::uint64_t seed = 0;
    std::vector<MetricRow> curve;
    std::vector<double> loss_trace;
    std::optional<double> cv_accuracy;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
};

struct ExperimentResult {
    std::vector<MetricRow> mean_curve;
    std::vector<RunRecord> runs;
};

/// Fits and scores one split: normalization (machine schema) and training
/// on `train`, per-second curve on `test`.
RunRecord run_split(std::span<const FeatureSequence> samples, const Partition& split, const ExperimentConfig& config,
                    std::uint64_t run_seed);

/// n runs of split -> train -> per_second_curve with seeds derived from the
/// master seed; returns the element-wise mean curve and every run.
ExperimentResult repeat_experiment(std::span<const FeatureSequence> samples, const ExperimentConfig& config);

/// Element-wise mean of equally shaped curves.
std::vector<MetricRow> average_curves(std::span<const std::vector<MetricRow>> curves);

struct ComparisonRow {
    std::int64_t t = 0;
    double f1_machine = 0, f1_process = 0, delta_f1 = 0;
    double recall_machine = 0, recall_process = 0, delta_recall = 0;
    double fpr_machine = 0, fpr_process = 0, delta_fpr = 0;
};

struct ComparisonReport {
    std::vector<ComparisonRow> rows; // shared horizon, deltas are process - machine
    double mean_delta_f1 = 0;
    double mean_delta_recall = 0;
    double max_fpr_machine = 0;
    double max_fpr_process = 0;
};

/// Throws Error(range) when the curves share no t.
ComparisonReport compare_levels(std::span<const MetricRow> machine, std::span<const MetricRow> process);

// ---------------------------------------------------------------------------
// Report files

/// CSV: "# stamp" comment line, header
/// t,n,accuracy,precision,recall,f1,fpr,no_data_count, one row per t.
std::string report_csv(std::span<const MetricRow> rows, const ArtifactStamp& stamp);
void write_report_csv(const std::string& path, std::span<const MetricRow> rows, const ArtifactStamp& stamp);
std::vector<MetricRow> read_report_csv(const std::string& path);

std::string comparison_csv(const ComparisonReport& report);
void write_comparison_csv(const std::string& path, const ComparisonReport& report);

} // namespace procsight
