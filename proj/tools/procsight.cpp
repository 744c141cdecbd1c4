// procsight command-line driver.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "procsight/campaign.hpp"
#include "procsight/error.hpp"
#include "procsight/eval.hpp"
#include "procsight/hash.hpp"
#include "procsight/ingest.hpp"
#include "procsight/kernels.hpp"
#include "procsight/model_io.hpp"
#include "procsight/pipeline.hpp"

using namespace procsight;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const std::string& path, const std::string& text) {
    const std::string partial = path + ".partial";
    {
        std::ofstream out(partial, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::io, "cannot open '" + partial + "' for writing");
        out << text;
        if (!out.flush()) fail(ErrorKind::io, "write failed for '" + path + "'");
    }
    std::filesystem::rename(partial, path);
}

/// --seed beats PROCSIGHT_SEED, which beats the config file.
std::optional<std::uint64_t> seed_override(const std::optional<std::uint64_t>& flag) {
    if (flag) return flag;
    if (const char* env = std::getenv("PROCSIGHT_SEED"); env && *env) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (*end != '\0') fail(ErrorKind::config, std::string("PROCSIGHT_SEED is not an integer: ") + env);
        return v;
    }
    return std::nullopt;
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
    std::string config, out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n_malicious, n_benign;
    bool no_background = false;
};

int cmd_simulate(const SimulateArgs& a) {
    CampaignConfig cfg = a.config.empty() ? CampaignConfig{} : campaign_config_from_json(slurp(a.config));
    if (auto s = seed_override(a.seed)) cfg.seed = *s;
    if (a.n_malicious) cfg.n_malicious = *a.n_malicious;
    if (a.n_benign) cfg.n_benign = *a.n_benign;
    if (a.no_background) cfg.background_noise = false;
    cfg.validate();
    const std::string canonical = campaign_config_to_json(cfg);
    const CampaignDataset data = generate_dataset(cfg);
    write_campaign(a.out, data, ArtifactStamp{git_blob_hash(canonical), cfg.seed, kManifestFormatVersion});
    std::printf("simulate: %zu iterations, %zu activities, %zu events, %zu hollows reports, %zu machine windows -> %s\n",
                data.plans.size(), data.activities.size(), data.events.size(), data.reports.size(),
                data.machine_series.size(), a.out.c_str());
    return 0;
}

// --- ingest -----------------------------------------------------------------

struct IngestArgs {
    std::string events, hollows, manifest, out;
    std::int64_t window_secs = 120;
};

int cmd_ingest(const IngestArgs& a) {
    IngestStats stats;
    const auto events = read_event_file(a.events, &stats.read);
    const auto reports = a.hollows.empty() ? std::vector<HollowsReport>{} : read_hollows_file(a.hollows);
    auto activities = ingest_events(events, reports, Millis{a.window_secs * 1000}, &stats);
    std::size_t unknown = 0;
    ArtifactStamp stamp;
    stamp.config_hash = git_blob_hash(slurp(a.events));
    if (!a.manifest.empty()) {
        const Manifest m = read_manifest(a.manifest);
        unknown = apply_labels(activities, m);
        stamp.seed = m.stamp.seed;
    }
    write_activity_store(a.out, activities, stamp);
    std::printf("ingest: %zu lines, %zu parsed, %zu unsupported skipped, %zu filtered, %zu guids repaired, "
                "%zu activities (%zu orphans, %zu unlabeled), %zu hollows unmatched -> %s\n",
                stats.read.lines, stats.read.parsed, stats.read.unsupported, stats.filtered_out,
                stats.guids_rewritten, activities.size(), stats.orphans, unknown, stats.hollows_unmatched,
                a.out.c_str());
    return 0;
}

// --- featurize --------------------------------------------------------------

struct FeaturizeArgs {
    std::string schema, activities, labels, campaign, out;
    std::vector<std::string> machine_csv;
    bool scale_timestamps = false;
};

int cmd_featurize(const FeaturizeArgs& a) {
    MatrixFile m;
    try {
        m.schema = parse_schema_id(a.schema);
    } catch (const Error&) {
        fail(ErrorKind::config, "unknown schema '" + a.schema + "'");
    }
    EncodeDiagnostics diag;
    std::size_t skipped = 0;
    if (is_process_schema(m.schema)) {
        if (a.activities.empty()) fail(ErrorKind::config, "--activities is required for process schemas");
        auto activities = read_activity_store(a.activities);
        if (!a.labels.empty()) apply_labels(activities, read_manifest(a.labels));
        for (const ProcessActivity& act : activities) skipped += act.label == Label::unknown ? 1 : 0;
        EncodeOptions opts;
        opts.scale_timestamps = a.scale_timestamps;
        m.sequences = encode_activities(activities, m.schema, opts, &diag);
        m.stamp.config_hash = git_blob_hash(slurp(a.activities));
    } else {
        std::vector<std::string> files = a.machine_csv;
        if (!a.campaign.empty()) {
            const Manifest manifest = read_manifest((std::filesystem::path(a.campaign) / "manifest.json").string());
            m.stamp.seed = manifest.stamp.seed;
            for (const MachineWindow& w : manifest.windows)
                files.push_back((std::filesystem::path(a.campaign) / w.file).string());
        }
        if (files.empty()) fail(ErrorKind::config, "machine schema needs --campaign or --machine-csv");
        std::string all;
        for (const std::string& f : files) {
            MachineSeries series = read_machine_csv(f);
            all += slurp(f);
            if (series.label == Label::unknown) {
                ++skipped;
                continue;
            }
            m.sequences.push_back(encode_machine(series));
        }
        m.stamp.config_hash = git_blob_hash(all);
    }
    write_matrix_file(a.out, m);
    std::printf("featurize: %zu sequences (%s, width %zu), %zu unlabeled skipped, %zu unknown integrity, "
                "%zu unknown port names -> %s\n",
                m.sequences.size(), to_string(m.schema), schema_width(m.schema), skipped, diag.unknown_integrity,
                diag.unknown_port_names, a.out.c_str());
    return 0;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
    std::string matrix, out, test_out, cell = "gru";
    std::optional<std::uint64_t> seed;
    TrainConfig train;
    std::int64_t train_horizon = 30;
    double train_fraction = 0.8;
};

int cmd_train(TrainArgs a) {
    const MatrixFile m = read_matrix_file(a.matrix);
    try {
        a.train.cell = parse_cell_kind(a.cell);
    } catch (const Error&) {
        fail(ErrorKind::config, "unknown cell '" + a.cell + "'");
    }
    a.train.seed = seed_override(a.seed).value_or(0);
    try {
        a.train.validate();
    } catch (const Error& e) {
        fail(ErrorKind::config, e.what());
    }

    std::vector<std::size_t> train_idx(m.sequences.size());
    for (std::size_t i = 0; i < train_idx.size(); ++i) train_idx[i] = i;
    if (!a.test_out.empty()) {
        std::vector<Label> labels;
        for (const FeatureSequence& s : m.sequences) labels.push_back(s.label);
        const Partition p = split_undersample(labels, derive_seed(a.train.seed, 0), a.train_fraction);
        train_idx = p.train;
        MatrixFile test;
        test.schema = m.schema;
        test.stamp = m.stamp;
        test.stamp.seed = a.train.seed;
        for (std::size_t i : p.test) test.sequences.push_back(m.sequences[i]);
        write_matrix_file(a.test_out, test);
    }
    std::vector<FeatureSequence> train_set;
    for (std::size_t i : train_idx) {
        FeatureSequence s = a.train_horizon > 0 ? truncate_to_horizon(m.sequences[i], a.train_horizon) : m.sequences[i];
        if (!s.empty()) train_set.push_back(std::move(s));
    }
    std::vector<double> losses;
    TrainConfig tc = a.train;
    tc.seed = derive_seed(a.train.seed, 1);
    RnnModel model = fit_model(std::move(train_set), tc, &losses);
    model.stamp = ArtifactStamp{m.stamp.config_hash, a.train.seed, kModelFormatVersion};
    save_model(model, a.out);
    std::printf("train: %s/%s hidden %zu, %zu samples, %zu epochs, final loss %.6f, kernels %s -> %s\n",
                to_string(model.params.cell()), to_string(model.schema), model.params.hidden_width(),
                train_idx.size(), losses.size(), losses.empty() ? 0.0 : losses.back(),
                kernels::to_string(kernels::active().isa), a.out.c_str());
    return 0;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
    std::string model, test, out;
    std::int64_t horizon = 30;
};

int cmd_eval(const EvalArgs& a) {
    const RnnModel model = load_model(a.model);
    const MatrixFile test = read_matrix_file(a.test);
    const auto curve = per_second_curve(model, test.sequences, a.horizon);
    write_report_csv(a.out, curve, model.stamp);
    const MetricRow& last = curve.back();
    std::printf("eval: %zu test sequences, t=%lld accuracy %.2f f1 %.4f fpr %.4f -> %s\n", test.sequences.size(),
                static_cast<long long>(last.t), last.accuracy, last.f1, last.fpr, a.out.c_str());
    return 0;
}

// --- report -----------------------------------------------------------------

struct ReportArgs {
    std::vector<std::string> compare;
    std::string out;
};

int cmd_report(const ReportArgs& a) {
    if (a.compare.size() != 2) fail(ErrorKind::config, "--compare takes <machine.csv> <process.csv>");
    const auto machine = read_report_csv(a.compare[0]);
    const auto process = read_report_csv(a.compare[1]);
    const ComparisonReport cmp = compare_levels(machine, process);
    const std::string csv = comparison_csv(cmp);
    if (a.out.empty()) std::fputs(csv.c_str(), stdout);
    else write_text(a.out, csv);
    std::fprintf(a.out.empty() ? stderr : stdout,
                 "report: %zu shared seconds, mean delta f1 %+.4f, mean delta recall %+.4f, max fpr machine %.4f, "
                 "process %.4f\n",
                 cmp.rows.size(), cmp.mean_delta_f1, cmp.mean_delta_recall, cmp.max_fpr_machine, cmp.max_fpr_process);
    return 0;
}

// --- pipeline ---------------------------------------------------------------

struct PipelineArgs {
    std::string config, out;
    std::optional<std::uint64_t> seed;
    bool resume = false;
};

int cmd_pipeline(const PipelineArgs& a) {
    PipelineConfig cfg = a.config.empty() ? PipelineConfig{} : pipeline_config_from_json(slurp(a.config));
    if (auto s = seed_override(a.seed)) cfg.seed = *s;
    if (!a.out.empty()) cfg.out_dir = a.out;
    if (a.resume) cfg.resume = true;
    const PipelineResult r = run_pipeline(cfg);
    for (const std::string& s : r.skipped_stages) std::printf("pipeline: skipped %s (up to date)\n", s.c_str());
    for (const std::string& p : r.artifacts) std::printf("pipeline: wrote %s\n", p.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"procsight: per-process malware detection from endpoint telemetry"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic detonation campaign");
    simulate->add_option("--config", sim.config, "Campaign config JSON");
    simulate->add_option("--seed", sim.seed, "Master seed");
    simulate->add_option("--out", sim.out, "Output directory")->required();
    simulate->add_option("--malicious", sim.n_malicious, "Malicious sample count");
    simulate->add_option("--benign", sim.n_benign, "Benign sample count");
    simulate->add_flag("--no-background", sim.no_background, "Disable background applications");

    IngestArgs ing;
    auto* ingest = app.add_subcommand("ingest", "Reconstruct per-process activities from Sysmon events");
    ingest->add_option("--events", ing.events, "Newline-JSON Sysmon events")->required();
    ingest->add_option("--hollows", ing.hollows, "Newline-JSON hollows reports");
    ingest->add_option("--manifest", ing.manifest, "Campaign manifest for labels");
    ingest->add_option("--window", ing.window_secs, "Hollows join window (seconds)");
    ingest->add_option("--out", ing.out, "Activity store")->required();

    FeaturizeArgs feat;
    auto* featurize = app.add_subcommand("featurize", "Encode activities or machine series as a matrix file");
    featurize->add_option("--schema", feat.schema, "event_only | complete | machine")->required();
    featurize->add_option("--activities", feat.activities, "Activity store (process schemas)");
    featurize->add_option("--labels", feat.labels, "Manifest whose labels override the store's");
    featurize->add_option("--campaign", feat.campaign, "Campaign directory (machine schema)");
    featurize->add_option("--machine-csv", feat.machine_csv, "Machine series CSV files");
    featurize->add_flag("--scale-timestamps", feat.scale_timestamps, "Divide the timestamp column by 120000");
    featurize->add_option("--out", feat.out, "Matrix file")->required();

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train a recurrent classifier");
    train_cmd->add_option("--matrix", tr.matrix, "Matrix file")->required();
    train_cmd->add_option("--out", tr.out, "Model file")->required();
    train_cmd->add_option("--test-out", tr.test_out, "Hold out a balanced test split and write it here");
    train_cmd->add_option("--seed", tr.seed, "Seed");
    train_cmd->add_option("--cell", tr.cell, "gru | lstm");
    train_cmd->add_option("--epochs", tr.train.epochs, "Epochs");
    train_cmd->add_option("--lr", tr.train.learning_rate, "Adam learning rate");
    train_cmd->add_option("--batch", tr.train.batch_size, "Batch size");
    train_cmd->add_option("--hidden", tr.train.hidden_width, "Hidden width");
    train_cmd->add_option("--train-horizon", tr.train_horizon, "Truncate training sequences to this many seconds (0 keeps all)");
    train_cmd->add_option("--train-fraction", tr.train_fraction, "Malicious share used for training with --test-out");

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "Per-second evaluation of a model");
    eval->add_option("--model", ev.model, "Model file")->required();
    eval->add_option("--test", ev.test, "Test matrix file")->required();
    eval->add_option("--horizon", ev.horizon, "Last second to evaluate");
    eval->add_option("--out", ev.out, "Report CSV")->required();

    ReportArgs rep;
    auto* report = app.add_subcommand("report", "Compare machine-level and process-level reports");
    report->add_option("--compare", rep.compare, "<machine.csv> <process.csv>")->required()->expected(2);
    report->add_option("--out", rep.out, "Comparison CSV (stdout when omitted)");

    PipelineArgs pipe;
    auto* pipeline = app.add_subcommand("pipeline", "simulate -> ingest -> featurize -> train -> eval -> report");
    pipeline->add_option("--config", pipe.config, "Pipeline config JSON");
    pipeline->add_option("--seed", pipe.seed, "Master seed");
    pipeline->add_option("--out", pipe.out, "Output directory (overrides out_dir)");
    pipeline->add_flag("--resume", pipe.resume, "Skip stages whose outputs are current");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*simulate) return cmd_simulate(sim);
        if (*ingest) return cmd_ingest(ing);
        if (*featurize) return cmd_featurize(feat);
        if (*train_cmd) return cmd_train(tr);
        if (*eval) return cmd_eval(ev);
        if (*report) return cmd_report(rep);
        if (*pipeline) return cmd_pipeline(pipe);
    } catch (const Error& e) {
        std::fprintf(stderr, "procsight: %s: %s\n", to_string(e.kind()), e.what());
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "procsight: error: %s\n", e.what());
        return 3;
    }
    return 2;
}
