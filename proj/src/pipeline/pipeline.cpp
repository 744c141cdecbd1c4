#include "procsight/pipeline.hpp"

#include <filesystem>
#include <map>

#include "../io/json_util.hpp"
#include "procsight/error.hpp"
#include "procsight/hash.hpp"

namespace procsight {

using detail::json;
namespace fs = std::filesystem;

std::vector<ProcessActivity> ingest_events(const std::vector<SysmonEvent>& events,
                                           const std::vector<HollowsReport>& reports, Millis hollows_window,
                                           IngestStats* stats) {
    std::vector<SysmonEvent> kept = filter_events(events);
    GuidRepair repaired = resolve_guid_collisions(kept);
    std::vector<ProcessActivity> activities = correlate(repaired.events);
    HollowsJoin joined = attach_hollows(std::move(activities), reports, hollows_window);
    if (stats) {
        stats->filtered_out = events.size() - kept.size();
        stats->guids_rewritten = repaired.rewritten;
        stats->orphans = 0;
        for (const ProcessActivity& a : joined.activities) stats->orphans += a.orphan ? 1 : 0;
        stats->hollows_unmatched = joined.unmatched.size();
    }
    return std::move(joined.activities);
}

std::vector<FeatureSequence> encode_activities(const std::vector<ProcessActivity>& activities, SchemaId schema,
                                               const EncodeOptions& options, EncodeDiagnostics* diagnostics) {
    require(is_process_schema(schema), ErrorKind::schema,
            std::string("schema ") + to_string(schema) + " does not encode process activities");
    std::vector<FeatureSequence> out;
    for (const ProcessActivity& a : activities) {
        if (a.label == Label::unknown) continue;
        out.push_back(schema == SchemaId::event_only_5 ? encode_event_only(a)
                                                       : encode_complete(a, options, diagnostics));
    }
    return out;
}

CampaignFeatures featurize_campaign(const CampaignDataset& data, const EncodeOptions& options, Millis hollows_window) {
    CampaignFeatures f;
    std::vector<ProcessActivity> activities = ingest_events(data.events, data.reports, hollows_window, &f.ingest);
    Manifest manifest;
    manifest.entries = data.manifest;
    manifest.windows = data.windows;
    f.unlabeled = apply_labels(activities, manifest);
    f.event_only = encode_activities(activities, SchemaId::event_only_5, options);
    f.complete = encode_activities(activities, SchemaId::complete_31, options, &f.diagnostics);
    for (const MachineSeries& s : data.machine_series) f.machine.push_back(encode_machine(s));
    return f;
}

// ---------------------------------------------------------------------------
// Config

void PipelineConfig::validate() const {
    if (out_dir.empty()) fail(ErrorKind::config, "out_dir is empty");
    if (schemas.empty()) fail(ErrorKind::config, "no schemas selected");
    bool has_primary = false;
    for (std::size_t i = 0; i < schemas.size(); ++i) {
        has_primary = has_primary || schemas[i] == primary;
        for (std::size_t j = 0; j < i; ++j)
            if (schemas[i] == schemas[j])
                fail(ErrorKind::config, std::string("schema ") + to_string(schemas[i]) + " listed twice");
    }
    if (!has_primary) fail(ErrorKind::config, std::string("primary schema ") + to_string(primary) + " is not selected");
    if (horizon < 1) fail(ErrorKind::config, "eval horizon must be >= 1");
    if (repetitions < 1) fail(ErrorKind::config, "repetitions must be >= 1");
    if (!(train_fraction > 0 && train_fraction < 1)) fail(ErrorKind::config, "train_fraction must lie in (0, 1)");
    if (cv_folds == 1) fail(ErrorKind::config, "cv_folds must be 0 or >= 2");
    if (train_horizon_secs < 0) fail(ErrorKind::config, "train_horizon_secs must be >= 0");
    if (hollows_window_secs <= 0) fail(ErrorKind::config, "hollows_window_secs must be > 0");
    try {
        train.validate();
    } catch (const Error& e) {
        fail(ErrorKind::config, std::string("train: ") + e.what());
    }
    campaign.validate();
}

namespace {

const char* const kTopKeys[] = {"seed", "out_dir", "campaign", "ingest", "featurize", "schemas",
                                "primary", "train", "eval", "resume"};

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    if (!j.is_object()) fail(ErrorKind::config, where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) fail(ErrorKind::config, where + ": unknown key '" + key + "'");
    }
}

template <typename T>
void get(const json& j, const char* key, T& value, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        j.at(key).get_to(value);
    } catch (const json::exception&) {
        fail(ErrorKind::config, where + ": bad value for '" + key + "'");
    }
}

SchemaId schema_from_config(const std::string& name) {
    try {
        return parse_schema_id(name);
    } catch (const Error&) {
        fail(ErrorKind::config, "unknown schema id '" + name + "'");
    }
}

json to_json_without_paths(const PipelineConfig& c) {
    json schemas = json::array();
    for (SchemaId s : c.schemas) schemas.push_back(to_string(s));
    return json{{"seed", c.seed},
                {"campaign", json::parse(campaign_config_to_json(c.campaign))},
                {"ingest", {{"hollows_window_secs", c.hollows_window_secs}}},
                {"featurize", {{"scale_timestamps", c.encode.scale_timestamps}}},
                {"schemas", schemas},
                {"primary", to_string(c.primary)},
                {"train",
                 {{"learning_rate", c.train.learning_rate},
                  {"epochs", c.train.epochs},
                  {"batch_size", c.train.batch_size},
                  {"hidden_width", c.train.hidden_width},
                  {"cell", to_string(c.train.cell)},
                  {"beta1", c.train.beta1},
                  {"beta2", c.train.beta2},
                  {"epsilon", c.train.epsilon}}},
                {"eval",
                 {{"horizon", c.horizon},
                  {"repetitions", c.repetitions},
                  {"train_fraction", c.train_fraction},
                  {"cv_folds", c.cv_folds},
                  {"train_horizon_secs", c.train_horizon_secs}}}};
}

} // namespace

PipelineConfig pipeline_config_from_json(const std::string& text) {
    json j;
    try {
        j = detail::parse_json(text);
    } catch (const ParseError& e) {
        fail(ErrorKind::config, std::string("pipeline config: ") + e.what());
    }
    if (!j.is_object()) fail(ErrorKind::config, "pipeline config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : kTopKeys) ok = ok || key == k;
        if (!ok) fail(ErrorKind::config, "pipeline config: unknown key '" + key + "'");
    }
    PipelineConfig c;
    get(j, "seed", c.seed, "pipeline config");
    get(j, "out_dir", c.out_dir, "pipeline config");
    get(j, "resume", c.resume, "pipeline config");
    if (j.contains("campaign")) c.campaign = campaign_config_from_json(j.at("campaign").dump());
    if (j.contains("ingest")) {
        const json& s = j.at("ingest");
        reject_unknown(s, {"hollows_window_secs"}, "ingest");
        get(s, "hollows_window_secs", c.hollows_window_secs, "ingest");
    }
    if (j.contains("featurize")) {
        const json& s = j.at("featurize");
        reject_unknown(s, {"scale_timestamps"}, "featurize");
        get(s, "scale_timestamps", c.encode.scale_timestamps, "featurize");
    }
    if (j.contains("schemas")) {
        std::vector<std::string> names;
        get(j, "schemas", names, "pipeline config");
        c.schemas.clear();
        for (const std::string& n : names) c.schemas.push_back(schema_from_config(n));
    }
    if (j.contains("primary")) {
        std::string name;
        get(j, "primary", name, "pipeline config");
        c.primary = schema_from_config(name);
    }
    if (j.contains("train")) {
        const json& s = j.at("train");
        reject_unknown(s, {"learning_rate", "epochs", "batch_size", "hidden_width", "cell", "beta1", "beta2", "epsilon"},
                       "train");
        get(s, "learning_rate", c.train.learning_rate, "train");
        get(s, "epochs", c.train.epochs, "train");
        get(s, "batch_size", c.train.batch_size, "train");
        get(s, "hidden_width", c.train.hidden_width, "train");
        get(s, "beta1", c.train.beta1, "train");
        get(s, "beta2", c.train.beta2, "train");
        get(s, "epsilon", c.train.epsilon, "train");
        if (s.contains("cell")) {
            std::string cell;
            get(s, "cell", cell, "train");
            try {
                c.train.cell = parse_cell_kind(cell);
            } catch (const Error&) {
                fail(ErrorKind::config, "train: unknown cell '" + cell + "'");
            }
        }
    }
    if (j.contains("eval")) {
        const json& s = j.at("eval");
        reject_unknown(s, {"horizon", "repetitions", "train_fraction", "cv_folds", "train_horizon_secs"}, "eval");
        get(s, "horizon", c.horizon, "eval");
        get(s, "repetitions", c.repetitions, "eval");
        get(s, "train_fraction", c.train_fraction, "eval");
        get(s, "cv_folds", c.cv_folds, "eval");
        get(s, "train_horizon_secs", c.train_horizon_secs, "eval");
    }
    c.validate();
    return c;
}

std::string pipeline_config_to_json(const PipelineConfig& config) {
    json j = to_json_without_paths(config);
    j["out_dir"] = config.out_dir;
    j["resume"] = config.resume;
    return j.dump(2);
}

std::string config_hash(const PipelineConfig& config) { return git_blob_hash(to_json_without_paths(config).dump()); }

// ---------------------------------------------------------------------------
// Run

namespace {

std::string stamp_hash_of_json_artifact(const fs::path& path, bool first_line_only) {
    std::error_code ec;
    if (!fs::exists(path, ec)) return {};
    try {
        std::string text;
        if (first_line_only) {
            const auto lines = detail::read_lines(path.string());
            if (lines.empty()) return {};
            text = lines.front();
        } else {
            text = detail::read_file(path.string());
        }
        const json j = detail::parse_json(text);
        return detail::stamp_from_json(j.value("stamp", json::object())).config_hash;
    } catch (const Error&) {
        return {};
    }
}

template <typename F>
auto stage(const char* name, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const NumericError& e) {
        throw NumericError(std::string("stage ") + name + ": " + e.what(), e.step());
    } catch (const Error& e) {
        throw Error(e.kind(), std::string("stage ") + name + ": " + e.what());
    } catch (const std::exception& e) {
        throw Error(ErrorKind::io, std::string("stage ") + name + ": " + e.what());
    }
}

std::uint64_t experiment_seed(std::uint64_t master, SchemaId schema) {
    return derive_seed(master, 100 + static_cast<std::uint64_t>(schema));
}

json curve_summary(const std::vector<MetricRow>& curve) {
    double f1 = 0, recall = 0, fpr = 0, acc = 0;
    for (const MetricRow& r : curve) {
        f1 += r.f1;
        recall += r.recall;
        fpr += r.fpr;
        acc += r.accuracy;
    }
    const auto n = static_cast<double>(curve.size());
    char buf[4][32];
    std::snprintf(buf[0], sizeof buf[0], "%.6f", f1 / n);
    std::snprintf(buf[1], sizeof buf[1], "%.6f", recall / n);
    std::snprintf(buf[2], sizeof buf[2], "%.6f", fpr / n);
    std::snprintf(buf[3], sizeof buf[3], "%.6f", acc / n);
    return json{{"mean_f1", buf[0]}, {"mean_recall", buf[1]}, {"mean_fpr", buf[2]}, {"mean_accuracy", buf[3]}};
}

} // namespace

PipelineResult run_pipeline(const PipelineConfig& given) {
    PipelineConfig config = given;
    config.campaign.seed = derive_seed(config.seed, 1);
    stage("validate", [&] { config.validate(); });

    const std::string hash = config_hash(config);
    const ArtifactStamp stamp{hash, config.seed, 1};
    const fs::path out(config.out_dir);
    const fs::path campaign_dir = out / "campaign";
    PipelineResult result;

    stage("setup", [&] {
        std::error_code ec;
        fs::create_directories(out / "matrices", ec);
        fs::create_directories(out / "reports", ec);
        if (ec) fail(ErrorKind::io, "cannot create '" + out.string() + "': " + ec.message());
    });

    // simulate
    if (config.resume && stamp_hash_of_json_artifact(campaign_dir / "manifest.json", false) == hash) {
        result.skipped_stages.push_back("simulate");
    } else {
        stage("simulate", [&] { write_campaign(campaign_dir.string(), generate_dataset(config.campaign), stamp); });
    }

    // ingest
    const fs::path store = out / "activities.jsonl";
    if (config.resume && stamp_hash_of_json_artifact(store, true) == hash) {
        result.skipped_stages.push_back("ingest");
    } else {
        stage("ingest", [&] {
            const auto events = read_event_file((campaign_dir / "events.jsonl").string());
            const auto reports = read_hollows_file((campaign_dir / "hollows.jsonl").string());
            auto activities = ingest_events(events, reports, Millis{config.hollows_window_secs * 1000});
            apply_labels(activities, read_manifest((campaign_dir / "manifest.json").string()));
            write_activity_store(store.string(), activities, stamp);
        });
    }

    // featurize
    std::map<SchemaId, fs::path> matrices;
    for (SchemaId schema : config.schemas) {
        const fs::path path = out / "matrices" / (std::string(to_string(schema)) + ".jsonl");
        matrices[schema] = path;
        if (config.resume && stamp_hash_of_json_artifact(path, true) == hash) {
            result.skipped_stages.push_back(std::string("featurize:") + to_string(schema));
            continue;
        }
        stage("featurize", [&] {
            MatrixFile m;
            m.schema = schema;
            m.stamp = stamp;
            if (is_process_schema(schema)) {
                m.sequences = encode_activities(read_activity_store(store.string()), schema, config.encode);
            } else {
                const Manifest manifest = read_manifest((campaign_dir / "manifest.json").string());
                for (const MachineWindow& w : manifest.windows)
                    m.sequences.push_back(encode_machine(read_machine_csv((campaign_dir / w.file).string())));
            }
            write_matrix_file(path.string(), m);
        });
    }

    // train + eval
    json inputs = json::object();
    for (const char* name : {"events.jsonl", "hollows.jsonl", "manifest.json"})
        inputs[std::string("campaign/") + name] = git_blob_hash(detail::read_file((campaign_dir / name).string()));
    json reports = json::object();
    json seeds{{"master", config.seed}, {"campaign", config.campaign.seed}};
    std::map<SchemaId, std::vector<MetricRow>> curves;
    for (SchemaId schema : config.schemas) {
        const std::string name = to_string(schema);
        inputs["matrices/" + name + ".jsonl"] = git_blob_hash(detail::read_file(matrices[schema].string()));
        ExperimentConfig ec;
        ec.schema = schema;
        ec.train = config.train;
        ec.horizon = config.horizon;
        ec.repetitions = config.repetitions;
        ec.master_seed = experiment_seed(config.seed, schema);
        ec.train_fraction = config.train_fraction;
        ec.cv_folds = config.cv_folds;
        ec.train_horizon_secs = config.train_horizon_secs;
        seeds[name] = ec.master_seed;
        const ExperimentResult r = stage("train-eval", [&] {
            const MatrixFile m = read_matrix_file(matrices[schema].string());
            return repeat_experiment(m.sequences, ec);
        });
        curves[schema] = r.mean_curve;
        const std::string text = report_csv(r.mean_curve, stamp);
        const fs::path path = out / "reports" / (name + ".csv");
        stage("report", [&] { detail::atomic_write(path.string(), text); });
        result.artifacts.push_back(path.string());
        json summary = curve_summary(r.mean_curve);
        summary["path"] = "reports/" + name + ".csv";
        summary["hash"] = git_blob_hash(text);
        reports[name] = summary;
        if (schema == config.primary) result.report_csv = (out / "report.csv").string();
        if (schema == config.primary) stage("report", [&] { detail::atomic_write(result.report_csv, text); });
    }
    result.artifacts.push_back(result.report_csv);

    json comparison = nullptr;
    if (curves.count(SchemaId::machine_10) && is_process_schema(config.primary)) {
        stage("report", [&] {
            const ComparisonReport cmp = compare_levels(curves[SchemaId::machine_10], curves[config.primary]);
            result.comparison_csv = (out / "comparison.csv").string();
            write_comparison_csv(result.comparison_csv, cmp);
            result.artifacts.push_back(result.comparison_csv);
            char buf[2][32];
            std::snprintf(buf[0], sizeof buf[0], "%.6f", cmp.mean_delta_f1);
            std::snprintf(buf[1], sizeof buf[1], "%.6f", cmp.mean_delta_recall);
            comparison = json{{"process_schema", to_string(config.primary)},
                              {"mean_delta_f1", buf[0]},
                              {"mean_delta_recall", buf[1]}};
        });
    }

    const json envelope{{"format", "procsight.report"},
                        {"format_version", 1},
                        {"stamp", detail::stamp_to_json(stamp)},
                        {"config", json::parse(pipeline_config_to_json(config))},
                        {"seeds", seeds},
                        {"inputs", inputs},
                        {"reports", reports},
                        {"primary", to_string(config.primary)},
                        {"comparison", comparison}};
    result.envelope_json = (out / "report.json").string();
    stage("report", [&] { detail::atomic_write(result.envelope_json, envelope.dump(2) + "\n"); });
    result.artifacts.push_back(result.envelope_json);
    return result;
}

} // namespace procsight
