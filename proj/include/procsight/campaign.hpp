#pragma once

// Deterministic stand-in for a cyber-range detonation campaign.
//
// Samples run in synchronized iterations across a pool of VMs: each
// iteration draws 0-2 malware samples (never four zero-draws in a row while
// malware remains), places them on random VMs, fills the rest with benign
// samples and optionally adds benign background applications to every VM.
// Each execution yields a Sysmon event stream, an optional process-hollowing
// report, and per-second machine utilization for its VM.
//
// All profile parameters are fixture choices. They are tuned so that the
// classes are separable at a controllable level, not to mimic real malware.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "procsight/featurize.hpp"
#include "procsight/ingest.hpp"
#include "procsight/rng.hpp"
#include "procsight/stamp.hpp"

namespace procsight {

struct ProcessProfile {
    std::string name;

    // Post-creation event stream.
    double onset_mean_secs = 3.0;    // mean delay before the first post-creation event
    double event_rate = 0.3;         // Poisson events per second after onset
    double beacon_period_secs = 0.0; // > 0 adds periodic network events
    double network_propensity = 0.3; // weight of id-3 events
    double registry_propensity = 0.7;
    double set_value_share = 0.3;    // registry events that are id 13 (SetValue)
    double delete_value_share = 0.3; // id-12 events typed DeleteValue (others CreateKey)
    double termination_prob = 0.3;
    double min_lifetime_secs = 20.0;
    double filtered_event_rate = 0.05; // ids 7/11/22 that ingest filters out

    // Creation-record attributes.
    std::array<double, 4> integrity_weights{0.2, 0.05, 0.7, 0.05}; // High, Low, Medium, System
    double signed_prob = 0.8;
    double signature_valid_prob = 0.95; // given signed
    double same_image_loaded_prob = 0.05;

    // Network-record attributes.
    double tcp_share = 0.9;
    std::array<double, 3> port_weights{0.2, 0.7, 0.1}; // http, https, other

    double hollows_prob = 0.0; // honoured for malicious executions only

    // Utilization signature while the process runs.
    double cpu_user = 5.0;   // percent
    double cpu_system = 1.0; // percent
    double cpu_jitter = 2.0;
    double mem_mb = 60.0;
    double bytes_per_connection = 4000.0;
    double steady_bytes_rate = 0.0; // bytes/s while running
    int child_procs = 0;
};

/// Weighted choice among presets.
struct ProfileMix {
    std::vector<ProcessProfile> presets;
    std::vector<double> weights;

    const ProcessProfile& pick(Rng& rng) const;
};

/// Malware presets after the sample-type taxonomy (trojan, ransomware,
/// botnet, miner, exploit). Presets diversify fixtures; they are never labels.
ProfileMix default_malicious_mix();
/// Benign samples: installers, utilities, document viewers, browsers.
ProfileMix default_benign_mix();
/// Office-style applications running alongside samples.
ProfileMix default_background_mix();

void validate_profile(const ProcessProfile& profile);

struct CampaignConfig {
    std::size_t n_vms = 5;
    std::size_t n_malicious = 100;
    std::size_t n_benign = 100;
    std::int64_t window_secs = 120;
    std::uint64_t seed = 42;
    std::size_t max_malware_per_iteration = 2;
    /// Force a non-zero draw after three consecutive zero draws.
    bool force_nonzero = true;
    /// Benign background applications on every VM during each window.
    bool background_noise = true;
    std::size_t background_min = 2;
    std::size_t background_max = 4;
    /// Fraction of VMs whose Sysmon build emits zero-middle ProcessGuids.
    double degenerate_guid_fraction = 0.0;
    std::string campaign_start = "2023-03-01 09:00:00.000";
    std::int64_t iteration_gap_secs = 60; // VM reset time between windows

    ProfileMix malicious = default_malicious_mix();
    ProfileMix benign = default_benign_mix();
    ProfileMix background = default_background_mix();

    /// Throws Error(config).
    void validate() const;
};

struct Assignment {
    std::size_t vm = 0;
    std::string sample_id;
    Label label = Label::benign;

    bool operator==(const Assignment&) const = default;
};

struct IterationPlan {
    std::size_t index = 0;
    std::size_t malware_count = 0;
    std::vector<Assignment> assignments; // one per VM, ordered by vm
    Timestamp start_time{};
};

/// Uniform over {0, 1, 2}; uniform over {1, 2} when the last three draws were
/// all zero (and force_nonzero is set).
std::size_t draw_malware_count(Rng& rng, std::span<const std::size_t> history, std::size_t max_count = 2,
                               bool force_nonzero = true);

/// Iterations until every malicious sample has run exactly once (or
/// ceil(n_benign / n_vms) all-benign iterations when there is no malware).
std::vector<IterationPlan> schedule_campaign(const CampaignConfig& config);

struct ProcessContext {
    std::string machine;
    std::string process_guid;
    std::int64_t pid = 0;
    Timestamp origin{};
    Timestamp window_end{};
    std::string image; // defaults to a temp-dir path named after the profile
};

struct GeneratedProcess {
    ProcessActivity activity;               // ground truth, labeled, hollows attached
    std::vector<SysmonEvent> filtered_noise; // collected-but-unused ids (7, 11, 22)
};

GeneratedProcess generate_process_events(const ProcessProfile& profile, Label label, Rng& rng,
                                         const ProcessContext& context);

struct HostedProcess {
    const ProcessActivity* activity;
    const ProcessProfile* profile;
};

/// One snapshot per second over the window: baseline plus each hosted
/// process's load. Label is malicious iff any hosted activity is.
MachineSeries generate_machine_series(std::span<const HostedProcess> hosted, Rng& rng, Timestamp window_start,
                                      std::int64_t window_secs);

struct ManifestEntry {
    std::size_t iteration = 0;
    std::size_t vm = 0;
    std::string machine;
    std::string sample_id;   // empty for background applications
    std::string process_guid;
    std::int64_t pid = 0;
    Timestamp origin_time{};
    Label label = Label::benign;
    std::string preset;
    bool background = false;
};

struct MachineWindow {
    std::size_t iteration = 0;
    std::size_t vm = 0;
    std::string file; // relative path of the CSV within the campaign directory
    Label label = Label::benign;
};

struct CampaignDataset {
    CampaignConfig config;
    std::vector<IterationPlan> plans;
    std::vector<ProcessActivity> activities; // ground truth
    std::vector<SysmonEvent> events;         // unordered log, including filtered ids
    std::vector<HollowsReport> reports;
    std::vector<MachineSeries> machine_series;
    std::vector<ManifestEntry> manifest;
    std::vector<MachineWindow> windows;
};

CampaignDataset generate_dataset(const CampaignConfig& config);

std::string machine_name(std::size_t vm);

// ---------------------------------------------------------------------------
// Files

inline constexpr int kManifestFormatVersion = 1;

/// Writes events.jsonl, hollows.jsonl, machine/<window>.csv and manifest.json.
void write_campaign(const std::string& dir, const CampaignDataset& data, const ArtifactStamp& stamp = {});

struct Manifest {
    std::vector<ManifestEntry> entries;
    std::vector<MachineWindow> windows;
    std::size_t iterations = 0;
    ArtifactStamp stamp;
};

Manifest read_manifest(const std::string& path);

/// Sets each activity's label from the manifest by process_guid, falling back
/// to (machine, pid, origin_time) for repaired guids. Returns the number of
/// activities left unknown.
std::size_t apply_labels(std::vector<ProcessActivity>& activities, const Manifest& manifest);

CampaignConfig campaign_config_from_json(const std::string& json_text);
std::string campaign_config_to_json(const CampaignConfig& config);

} // namespace procsight
