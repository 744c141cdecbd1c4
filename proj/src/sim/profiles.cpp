#include <cmath>
#include <numeric>

#include "procsight/campaign.hpp"
#include "procsight/error.hpp"

namespace procsight {

const ProcessProfile& ProfileMix::pick(Rng& rng) const {
    require(!presets.empty() && presets.size() == weights.size(), ErrorKind::config,
            "profile mix needs one weight per preset");
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < presets.size(); ++i) {
        if (u < weights[i]) return presets[i];
        u -= weights[i];
    }
    return presets.back();
}

namespace {

ProcessProfile trojan() {
    ProcessProfile p;
    p.name = "trojan";
    p.onset_mean_secs = 1.5;
    p.event_rate = 0.5;
    p.network_propensity = 0.6;
    p.registry_propensity = 0.4;
    p.set_value_share = 0.65;
    p.delete_value_share = 0.2;
    p.termination_prob = 0.15;
    p.integrity_weights = {0.5, 0.0, 0.4, 0.1};
    p.signed_prob = 0.1;
    p.signature_valid_prob = 0.5;
    p.same_image_loaded_prob = 0.3;
    p.tcp_share = 0.85;
    p.port_weights = {0.4, 0.2, 0.4};
    p.hollows_prob = 0.35;
    p.cpu_user = 18;
    p.cpu_system = 6;
    p.cpu_jitter = 4;
    p.mem_mb = 90;
    p.bytes_per_connection = 6000;
    p.steady_bytes_rate = 400;
    p.child_procs = 4;
    return p;
}

ProcessProfile ransomware() {
    ProcessProfile p;
    p.name = "ransomware";
    p.onset_mean_secs = 1.0;
    p.event_rate = 1.2;
    p.network_propensity = 0.1;
    p.registry_propensity = 0.9;
    p.set_value_share = 0.7;
    p.delete_value_share = 0.5;
    p.termination_prob = 0.3;
    p.min_lifetime_secs = 40;
    p.integrity_weights = {0.6, 0.0, 0.3, 0.1};
    p.signed_prob = 0.05;
    p.signature_valid_prob = 0.3;
    p.same_image_loaded_prob = 0.1;
    p.port_weights = {0.3, 0.2, 0.5};
    p.hollows_prob = 0.2;
    p.cpu_user = 35;
    p.cpu_system = 25;
    p.cpu_jitter = 8;
    p.mem_mb = 300;
    p.bytes_per_connection = 2000;
    p.child_procs = 1;
    return p;
}

ProcessProfile botnet() {
    ProcessProfile p;
    p.name = "botnet";
    p.onset_mean_secs = 2.0;
    p.event_rate = 0.15;
    p.beacon_period_secs = 5.0;
    p.network_propensity = 0.8;
    p.registry_propensity = 0.2;
    p.set_value_share = 0.7;
    p.delete_value_share = 0.1;
    p.termination_prob = 0.05;
    p.integrity_weights = {0.45, 0.0, 0.45, 0.1};
    p.signed_prob = 0.1;
    p.signature_valid_prob = 0.5;
    p.same_image_loaded_prob = 0.2;
    p.tcp_share = 0.6;
    p.port_weights = {0.3, 0.0, 0.7};
    p.hollows_prob = 0.25;
    p.cpu_user = 8;
    p.cpu_system = 3;
    p.cpu_jitter = 2;
    p.mem_mb = 40;
    p.bytes_per_connection = 1500;
    p.steady_bytes_rate = 300;
    p.child_procs = 1;
    return p;
}

ProcessProfile miner() {
    ProcessProfile p;
    p.name = "miner";
    p.onset_mean_secs = 2.0;
    p.event_rate = 0.2;
    p.beacon_period_secs = 15.0;
    p.network_propensity = 0.5;
    p.registry_propensity = 0.5;
    p.set_value_share = 0.6;
    p.delete_value_share = 0.1;
    p.termination_prob = 0.05;
    p.integrity_weights = {0.4, 0.05, 0.5, 0.05};
    p.signed_prob = 0.1;
    p.signature_valid_prob = 0.4;
    p.port_weights = {0.1, 0.1, 0.8};
    p.hollows_prob = 0.15;
    p.cpu_user = 70;
    p.cpu_system = 4;
    p.cpu_jitter = 6;
    p.mem_mb = 200;
    p.bytes_per_connection = 3000;
    p.steady_bytes_rate = 500;
    return p;
}

ProcessProfile exploit() {
    ProcessProfile p;
    p.name = "exploit";
    p.onset_mean_secs = 0.8;
    p.event_rate = 0.8;
    p.network_propensity = 0.4;
    p.registry_propensity = 0.6;
    p.set_value_share = 0.6;
    p.delete_value_share = 0.3;
    p.termination_prob = 0.4;
    p.min_lifetime_secs = 15;
    p.integrity_weights = {0.4, 0.0, 0.1, 0.5};
    p.signed_prob = 0.15;
    p.signature_valid_prob = 0.5;
    p.same_image_loaded_prob = 0.4;
    p.port_weights = {0.3, 0.3, 0.4};
    p.hollows_prob = 0.5;
    p.cpu_user = 25;
    p.cpu_system = 10;
    p.cpu_jitter = 10;
    p.mem_mb = 120;
    p.bytes_per_connection = 8000;
    p.child_procs = 2;
    return p;
}

ProcessProfile installer() {
    ProcessProfile p;
    p.name = "installer";
    p.onset_mean_secs = 8.0;
    p.event_rate = 0.6;
    p.network_propensity = 0.1;
    p.registry_propensity = 0.9;
    p.set_value_share = 0.3;
    p.delete_value_share = 0.15;
    p.termination_prob = 0.5;
    p.min_lifetime_secs = 30;
    p.integrity_weights = {0.55, 0.0, 0.45, 0.0};
    p.signed_prob = 0.5;
    p.signature_valid_prob = 0.9;
    p.same_image_loaded_prob = 0.05;
    p.port_weights = {0.3, 0.7, 0.0};
    p.cpu_user = 25;
    p.cpu_system = 8;
    p.cpu_jitter = 8;
    p.mem_mb = 150;
    p.bytes_per_connection = 20000;
    p.child_procs = 2;
    return p;
}

ProcessProfile utility() {
    ProcessProfile p;
    p.name = "utility";
    p.onset_mean_secs = 10.0;
    p.event_rate = 0.15;
    p.network_propensity = 0.15;
    p.registry_propensity = 0.85;
    p.set_value_share = 0.2;
    p.delete_value_share = 0.1;
    p.termination_prob = 0.6;
    p.integrity_weights = {0.1, 0.05, 0.85, 0.0};
    p.signed_prob = 0.85;
    p.port_weights = {0.2, 0.8, 0.0};
    p.cpu_user = 4;
    p.cpu_system = 1;
    p.cpu_jitter = 2;
    p.mem_mb = 30;
    return p;
}

ProcessProfile viewer() {
    ProcessProfile p;
    p.name = "viewer";
    p.onset_mean_secs = 10.0;
    p.event_rate = 0.1;
    p.network_propensity = 0.2;
    p.registry_propensity = 0.8;
    p.set_value_share = 0.2;
    p.delete_value_share = 0.05;
    p.termination_prob = 0.2;
    p.integrity_weights = {0.0, 0.1, 0.9, 0.0};
    p.signed_prob = 0.9;
    p.port_weights = {0.1, 0.9, 0.0};
    p.cpu_user = 6;
    p.cpu_system = 1;
    p.cpu_jitter = 3;
    p.mem_mb = 120;
    return p;
}

ProcessProfile browser(const char* name, double cpu, double steady) {
    ProcessProfile p;
    p.name = name;
    p.onset_mean_secs = 6.0;
    p.event_rate = 0.3;
    p.network_propensity = 0.35;
    p.registry_propensity = 0.65;
    p.set_value_share = 0.15;
    p.delete_value_share = 0.05;
    p.termination_prob = 0.1;
    p.integrity_weights = {0.0, 0.4, 0.6, 0.0};
    p.signed_prob = 0.95;
    p.tcp_share = 0.8;
    p.port_weights = {0.15, 0.85, 0.0};
    p.cpu_user = cpu;
    p.cpu_system = 3;
    p.cpu_jitter = cpu * 0.6;
    p.mem_mb = 400;
    p.bytes_per_connection = 30000;
    p.steady_bytes_rate = steady;
    p.child_procs = 3;
    return p;
}

ProcessProfile office(const char* name, double cpu, double beacon, double steady, int children) {
    ProcessProfile p;
    p.name = name;
    p.onset_mean_secs = 8.0;
    p.event_rate = 0.15;
    p.beacon_period_secs = beacon;
    p.network_propensity = beacon > 0 ? 0.25 : 0.1;
    p.registry_propensity = beacon > 0 ? 0.75 : 0.9;
    p.set_value_share = 0.1;
    p.delete_value_share = 0.05;
    p.termination_prob = 0.05;
    p.integrity_weights = {0.0, 0.0, 1.0, 0.0};
    p.signed_prob = 0.98;
    p.port_weights = {0.05, 0.95, 0.0};
    p.cpu_user = cpu;
    p.cpu_system = 4;
    p.cpu_jitter = cpu;
    p.mem_mb = 350;
    p.bytes_per_connection = 25000;
    p.steady_bytes_rate = steady;
    p.child_procs = children;
    return p;
}

// In-house tooling: unsigned and elevated, but quiet.
ProcessProfile admin_tool() {
    ProcessProfile p;
    p.name = "admin-tool";
    p.onset_mean_secs = 12.0;
    p.event_rate = 0.08;
    p.network_propensity = 0.1;
    p.registry_propensity = 0.9;
    p.set_value_share = 0.15;
    p.delete_value_share = 0.05;
    p.termination_prob = 0.3;
    p.integrity_weights = {0.7, 0.0, 0.2, 0.1};
    p.signed_prob = 0.25;
    p.signature_valid_prob = 0.6;
    p.port_weights = {0.2, 0.8, 0.0};
    p.cpu_user = 6;
    p.cpu_system = 2;
    p.cpu_jitter = 4;
    p.mem_mb = 50;
    p.child_procs = 1;
    return p;
}

ProcessProfile updater() {
    ProcessProfile p = office("updater", 40, 0, 40000, 2);
    p.cpu_system = 12;
    p.cpu_jitter = 15;
    p.mem_mb = 250;
    p.onset_mean_secs = 6.0;
    return p;
}

} // namespace

ProfileMix default_malicious_mix() {
    return {{trojan(), ransomware(), botnet(), miner(), exploit()}, {0.45, 0.15, 0.15, 0.15, 0.10}};
}

ProfileMix default_benign_mix() {
    return {{installer(), utility(), viewer(), browser("browser", 15, 20000)}, {0.35, 0.30, 0.20, 0.15}};
}

ProfileMix default_background_mix() {
    return {{browser("office-browser", 25, 60000), office("word", 15, 0, 0, 1), office("teams", 30, 30, 30000, 2),
             office("outlook", 12, 60, 8000, 1), admin_tool(), updater()},
            {0.2, 0.15, 0.2, 0.15, 0.15, 0.15}};
}

void validate_profile(const ProcessProfile& p) {
    const auto unit = [&](double v, const char* what) {
        if (!(v >= 0.0 && v <= 1.0))
            fail(ErrorKind::config, "profile '" + p.name + "': " + what + " must lie in [0, 1]");
    };
    const auto nonneg = [&](double v, const char* what) {
        if (!(v >= 0.0 && std::isfinite(v)))
            fail(ErrorKind::config, "profile '" + p.name + "': " + what + " must be >= 0");
    };
    unit(p.network_propensity, "network_propensity");
    unit(p.registry_propensity, "registry_propensity");
    unit(p.set_value_share, "set_value_share");
    unit(p.delete_value_share, "delete_value_share");
    unit(p.termination_prob, "termination_prob");
    unit(p.signed_prob, "signed_prob");
    unit(p.signature_valid_prob, "signature_valid_prob");
    unit(p.same_image_loaded_prob, "same_image_loaded_prob");
    unit(p.tcp_share, "tcp_share");
    unit(p.hollows_prob, "hollows_prob");
    nonneg(p.onset_mean_secs, "onset_mean_secs");
    nonneg(p.event_rate, "event_rate");
    nonneg(p.beacon_period_secs, "beacon_period_secs");
    nonneg(p.min_lifetime_secs, "min_lifetime_secs");
    nonneg(p.filtered_event_rate, "filtered_event_rate");
    nonneg(p.cpu_user, "cpu_user");
    nonneg(p.cpu_system, "cpu_system");
    nonneg(p.cpu_jitter, "cpu_jitter");
    nonneg(p.mem_mb, "mem_mb");
    nonneg(p.bytes_per_connection, "bytes_per_connection");
    nonneg(p.steady_bytes_rate, "steady_bytes_rate");
    if (p.child_procs < 0) fail(ErrorKind::config, "profile '" + p.name + "': child_procs must be >= 0");
    double integrity = 0;
    for (double w : p.integrity_weights) {
        nonneg(w, "integrity weight");
        integrity += w;
    }
    if (integrity <= 0) fail(ErrorKind::config, "profile '" + p.name + "': integrity weights sum to zero");
    double ports = 0;
    for (double w : p.port_weights) {
        nonneg(w, "port weight");
        ports += w;
    }
    if (ports <= 0) fail(ErrorKind::config, "profile '" + p.name + "': port weights sum to zero");
}

namespace {

void validate_mix(const ProfileMix& mix, const char* what) {
    if (mix.presets.empty()) fail(ErrorKind::config, std::string(what) + " profile mix is empty");
    if (mix.presets.size() != mix.weights.size())
        fail(ErrorKind::config, std::string(what) + " profile mix needs one weight per preset");
    double total = 0;
    for (double w : mix.weights) {
        if (!(w >= 0 && std::isfinite(w))) fail(ErrorKind::config, std::string(what) + " weights must be >= 0");
        total += w;
    }
    if (total <= 0) fail(ErrorKind::config, std::string(what) + " weights sum to zero");
    for (const ProcessProfile& p : mix.presets) validate_profile(p);
}

} // namespace

void CampaignConfig::validate() const {
    if (n_vms < 1) fail(ErrorKind::config, "n_vms must be >= 1");
    if (window_secs <= 0) fail(ErrorKind::config, "window_secs must be > 0");
    if (n_malicious == 0 && n_benign == 0) fail(ErrorKind::config, "campaign has no samples");
    if (n_benign < n_vms)
        fail(ErrorKind::config, "benign pool (" + std::to_string(n_benign) + ") smaller than n_vms (" +
                                    std::to_string(n_vms) + ")");
    if (max_malware_per_iteration < 1 || max_malware_per_iteration > n_vms)
        fail(ErrorKind::config, "max_malware_per_iteration must lie in [1, n_vms]");
    if (background_min > background_max) fail(ErrorKind::config, "background_min exceeds background_max");
    if (!(degenerate_guid_fraction >= 0 && degenerate_guid_fraction <= 1))
        fail(ErrorKind::config, "degenerate_guid_fraction must lie in [0, 1]");
    if (iteration_gap_secs < 0) fail(ErrorKind::config, "iteration_gap_secs must be >= 0");
    try {
        (void)parse_timestamp(campaign_start);
    } catch (const Error&) {
        fail(ErrorKind::config, "campaign_start '" + campaign_start + "' is not a timestamp");
    }
    validate_mix(malicious, "malicious");
    validate_mix(benign, "benign");
    validate_mix(background, "background");
}

} // namespace procsight
