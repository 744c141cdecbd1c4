#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "procsight/campaign.hpp"
#include "procsight/eval.hpp"
#include "procsight/featurize.hpp"
#include "procsight/ingest.hpp"

namespace procsight {

// ---------------------------------------------------------------------------
// Stage helpers shared by the CLI subcommands and the pipeline.

struct IngestStats {
    EventReadStats read;
    std::size_t filtered_out = 0;   // collected but outside the analysis set
    std::size_t guids_rewritten = 0;
    std::size_t orphans = 0;
    std::size_t hollows_unmatched = 0;
};

/// filter -> guid repair -> correlate -> hollows join.
std::vector<ProcessActivity> ingest_events(const std::vector<SysmonEvent>& events,
                                           const std::vector<HollowsReport>& reports, Millis hollows_window,
                                           IngestStats* stats = nullptr);

/// Encodes labeled activities (unknown labels are skipped).
std::vector<FeatureSequence> encode_activities(const std::vector<ProcessActivity>& activities, SchemaId schema,
                                               const EncodeOptions& options = {},
                                               EncodeDiagnostics* diagnostics = nullptr);

struct CampaignFeatures {
    std::vector<FeatureSequence> event_only;
    std::vector<FeatureSequence> complete;
    std::vector<FeatureSequence> machine; // raw, unnormalized
    IngestStats ingest;
    EncodeDiagnostics diagnostics;
    std::size_t unlabeled = 0;
};

/// In-memory path from a generated campaign to all three feature sets,
/// going through the same ingest and labeling steps as files do.
CampaignFeatures featurize_campaign(const CampaignDataset& data, const EncodeOptions& options = {},
                                    Millis hollows_window = Millis{120'000});

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineConfig {
    std::uint64_t seed = 42;
    std::string out_dir = "procsight-out";
    CampaignConfig campaign;         // campaign.seed is derived from seed
    std::int64_t hollows_window_secs = 120;
    EncodeOptions encode;
    std::vector<SchemaId> schemas{SchemaId::event_only_5, SchemaId::complete_31, SchemaId::machine_10};
    SchemaId primary = SchemaId::complete_31; // written as report.csv
    TrainConfig train;
    std::int64_t horizon = 30;
    std::size_t repetitions = 3;
    double train_fraction = 0.8;
    std::size_t cv_folds = 0;
    std::int64_t train_horizon_secs = 30;
    /// Skip stages whose outputs exist and carry this config's hash.
    bool resume = false;

    /// Throws Error(config) before anything runs.
    void validate() const;
};

PipelineConfig pipeline_config_from_json(const std::string& text);
/// Canonical form; its git blob hash is the config hash stamped on artifacts.
std::string pipeline_config_to_json(const PipelineConfig& config);
std::string config_hash(const PipelineConfig& config);

struct PipelineResult {
    std::string report_csv;     // primary schema
    std::string envelope_json;  // config, seeds, hashes
    std::string comparison_csv; // machine vs primary, when both ran
    std::vector<std::string> artifacts;
    std::vector<std::string> skipped_stages;
};

/// simulate -> ingest -> featurize -> train/eval -> report. Errors are
/// rethrown with the stage name prefixed and keep their kind.
PipelineResult run_pipeline(const PipelineConfig& config);

} // namespace procsight
