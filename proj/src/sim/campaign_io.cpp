#include <filesystem>
#include <map>
#include <tuple>

#include "../io/json_util.hpp"
#include "procsight/campaign.hpp"
#include "procsight/error.hpp"

namespace procsight {

using detail::json;

namespace {

// Field table shared by the profile reader and writer.
template <typename F>
void for_each_profile_field(ProcessProfile& p, F&& f) {
    f("onset_mean_secs", p.onset_mean_secs);
    f("event_rate", p.event_rate);
    f("beacon_period_secs", p.beacon_period_secs);
    f("network_propensity", p.network_propensity);
    f("registry_propensity", p.registry_propensity);
    f("set_value_share", p.set_value_share);
    f("delete_value_share", p.delete_value_share);
    f("termination_prob", p.termination_prob);
    f("min_lifetime_secs", p.min_lifetime_secs);
    f("filtered_event_rate", p.filtered_event_rate);
    f("integrity_weights", p.integrity_weights);
    f("signed_prob", p.signed_prob);
    f("signature_valid_prob", p.signature_valid_prob);
    f("same_image_loaded_prob", p.same_image_loaded_prob);
    f("tcp_share", p.tcp_share);
    f("port_weights", p.port_weights);
    f("hollows_prob", p.hollows_prob);
    f("cpu_user", p.cpu_user);
    f("cpu_system", p.cpu_system);
    f("cpu_jitter", p.cpu_jitter);
    f("mem_mb", p.mem_mb);
    f("bytes_per_connection", p.bytes_per_connection);
    f("steady_bytes_rate", p.steady_bytes_rate);
    f("child_procs", p.child_procs);
}

json profile_to_json(ProcessProfile p) {
    json j{{"name", p.name}};
    for_each_profile_field(p, [&](const char* key, const auto& value) { j[key] = value; });
    return j;
}

ProcessProfile profile_from_json(const json& j) {
    if (!j.is_object()) fail(ErrorKind::config, "profile must be a JSON object");
    ProcessProfile p;
    p.name = j.value("name", std::string("custom"));
    for_each_profile_field(p, [&](const char* key, auto& value) {
        if (!j.contains(key)) return;
        try {
            j.at(key).get_to(value);
        } catch (const json::exception&) {
            fail(ErrorKind::config, "profile '" + p.name + "': bad value for '" + key + "'");
        }
    });
    return p;
}

json mix_to_json(const ProfileMix& mix) {
    json presets = json::array();
    for (const ProcessProfile& p : mix.presets) presets.push_back(profile_to_json(p));
    return json{{"presets", presets}, {"weights", mix.weights}};
}

ProfileMix mix_from_json(const json& j, const char* what) {
    if (!j.is_object() || !j.contains("presets")) fail(ErrorKind::config, std::string(what) + ": needs 'presets'");
    ProfileMix mix;
    for (const json& p : j.at("presets")) mix.presets.push_back(profile_from_json(p));
    if (j.contains("weights")) {
        try {
            j.at("weights").get_to(mix.weights);
        } catch (const json::exception&) {
            fail(ErrorKind::config, std::string(what) + ": weights must be numbers");
        }
    } else {
        mix.weights.assign(mix.presets.size(), 1.0);
    }
    return mix;
}

json entry_to_json(const ManifestEntry& e) {
    return json{{"iteration", e.iteration},   {"vm", e.vm},
                {"machine", e.machine},       {"sample_id", e.sample_id},
                {"process_guid", e.process_guid}, {"pid", e.pid},
                {"origin_time", format_timestamp(e.origin_time)}, {"label", to_string(e.label)},
                {"preset", e.preset},         {"background", e.background}};
}

} // namespace

std::string campaign_config_to_json(const CampaignConfig& c) {
    json j{{"n_vms", c.n_vms},
           {"n_malicious", c.n_malicious},
           {"n_benign", c.n_benign},
           {"window_secs", c.window_secs},
           {"seed", c.seed},
           {"max_malware_per_iteration", c.max_malware_per_iteration},
           {"force_nonzero", c.force_nonzero},
           {"background_noise", c.background_noise},
           {"background_min", c.background_min},
           {"background_max", c.background_max},
           {"degenerate_guid_fraction", c.degenerate_guid_fraction},
           {"campaign_start", c.campaign_start},
           {"iteration_gap_secs", c.iteration_gap_secs},
           {"malicious", mix_to_json(c.malicious)},
           {"benign", mix_to_json(c.benign)},
           {"background", mix_to_json(c.background)}};
    return j.dump(2);
}

CampaignConfig campaign_config_from_json(const std::string& text) {
    json j;
    try {
        j = detail::parse_json(text);
    } catch (const ParseError& e) {
        fail(ErrorKind::config, std::string("campaign config: ") + e.what());
    }
    if (!j.is_object()) fail(ErrorKind::config, "campaign config must be a JSON object");
    static const char* const kKnown[] = {"n_vms", "n_malicious", "n_benign", "window_secs", "seed",
                                         "max_malware_per_iteration", "force_nonzero", "background_noise",
                                         "background_min", "background_max", "degenerate_guid_fraction",
                                         "campaign_start", "iteration_gap_secs", "malicious", "benign",
                                         "background"};
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* k : kKnown) known = known || key == k;
        if (!known) fail(ErrorKind::config, "campaign config: unknown key '" + key + "'");
    }
    CampaignConfig c;
    const auto get = [&](const char* key, auto& value) {
        if (!j.contains(key)) return;
        try {
            j.at(key).get_to(value);
        } catch (const json::exception&) {
            fail(ErrorKind::config, std::string("campaign config: bad value for '") + key + "'");
        }
    };
    // Signed reads first so negative counts surface as config errors.
    const auto get_count = [&](const char* key, std::size_t& value) {
        if (!j.contains(key)) return;
        const json& v = j.at(key);
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
            fail(ErrorKind::config, std::string("campaign config: '") + key + "' must be a non-negative integer");
        value = v.get<std::size_t>();
    };
    get_count("n_vms", c.n_vms);
    get_count("n_malicious", c.n_malicious);
    get_count("n_benign", c.n_benign);
    get("window_secs", c.window_secs);
    get("seed", c.seed);
    get_count("max_malware_per_iteration", c.max_malware_per_iteration);
    get("force_nonzero", c.force_nonzero);
    get("background_noise", c.background_noise);
    get_count("background_min", c.background_min);
    get_count("background_max", c.background_max);
    get("degenerate_guid_fraction", c.degenerate_guid_fraction);
    get("campaign_start", c.campaign_start);
    get("iteration_gap_secs", c.iteration_gap_secs);
    if (j.contains("malicious")) c.malicious = mix_from_json(j.at("malicious"), "malicious");
    if (j.contains("benign")) c.benign = mix_from_json(j.at("benign"), "benign");
    if (j.contains("background")) c.background = mix_from_json(j.at("background"), "background");
    c.validate();
    return c;
}

void write_campaign(const std::string& dir, const CampaignDataset& data, const ArtifactStamp& stamp) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "machine", ec);
    if (ec) fail(ErrorKind::io, "cannot create '" + dir + "': " + ec.message());

    std::string events;
    for (const SysmonEvent& e : data.events) events += event_to_json_line(e) + "\n";
    detail::atomic_write((fs::path(dir) / "events.jsonl").string(), events);

    std::string hollows;
    for (const HollowsReport& r : data.reports) hollows += hollows_to_json_line(r) + "\n";
    detail::atomic_write((fs::path(dir) / "hollows.jsonl").string(), hollows);

    for (std::size_t i = 0; i < data.machine_series.size(); ++i)
        write_machine_csv((fs::path(dir) / data.windows[i].file).string(), data.machine_series[i]);

    json entries = json::array();
    std::size_t malicious = 0, benign_exec = 0, background = 0;
    std::map<std::string, int> benign_ids;
    for (const ManifestEntry& e : data.manifest) {
        entries.push_back(entry_to_json(e));
        if (e.background) ++background;
        else if (e.label == Label::malicious) ++malicious;
        else {
            ++benign_exec;
            benign_ids[e.sample_id] = 1;
        }
    }
    json windows = json::array();
    for (const MachineWindow& w : data.windows)
        windows.push_back({{"iteration", w.iteration}, {"vm", w.vm}, {"file", w.file}, {"label", to_string(w.label)}});
    json iterations = json::array();
    for (const IterationPlan& p : data.plans) {
        json assignments = json::array();
        for (const Assignment& a : p.assignments)
            assignments.push_back({{"vm", a.vm}, {"sample_id", a.sample_id}, {"label", to_string(a.label)}});
        iterations.push_back({{"index", p.index},
                              {"malware_count", p.malware_count},
                              {"start_time", format_timestamp(p.start_time)},
                              {"assignments", assignments}});
    }
    json manifest{{"format", "procsight.manifest"},
                  {"format_version", kManifestFormatVersion},
                  {"stamp", detail::stamp_to_json(stamp)},
                  {"window_secs", data.config.window_secs},
                  {"n_vms", data.config.n_vms},
                  {"background_noise", data.config.background_noise},
                  {"totals",
                   {{"iterations", data.plans.size()},
                    {"malicious", malicious},
                    {"benign_unique", benign_ids.size()},
                    {"benign_executions", benign_exec},
                    {"background_executions", background},
                    {"activities", data.activities.size()},
                    {"events", data.events.size()},
                    {"hollows_reports", data.reports.size()}}},
                  {"iterations", iterations},
                  {"entries", entries},
                  {"windows", windows}};
    detail::atomic_write((fs::path(dir) / "manifest.json").string(), manifest.dump(1) + "\n");
}

Manifest read_manifest(const std::string& path) {
    const json j = detail::parse_json(detail::read_file(path));
    if (detail::string_field(j, "format", "manifest") != "procsight.manifest")
        fail(ErrorKind::schema, "'" + path + "' is not a procsight manifest");
    const auto version = detail::int_field(j, "format_version", "manifest");
    if (version != kManifestFormatVersion)
        fail(ErrorKind::version, "manifest format_version " + std::to_string(version) + " unsupported (expected " +
                                     std::to_string(kManifestFormatVersion) + ")");
    Manifest m;
    m.stamp = detail::stamp_from_json(j.value("stamp", json::object()));
    const json& totals = detail::field(j, "totals", "manifest");
    m.iterations = static_cast<std::size_t>(detail::int_field(totals, "iterations", "manifest totals"));
    try {
        for (const json& e : detail::field(j, "entries", "manifest")) {
            ManifestEntry entry;
            entry.iteration = e.at("iteration").get<std::size_t>();
            entry.vm = e.at("vm").get<std::size_t>();
            entry.machine = e.at("machine").get<std::string>();
            entry.sample_id = e.at("sample_id").get<std::string>();
            entry.process_guid = e.at("process_guid").get<std::string>();
            entry.pid = e.at("pid").get<std::int64_t>();
            entry.origin_time = parse_timestamp(e.at("origin_time").get<std::string>());
            entry.label = parse_label(e.at("label").get<std::string>());
            entry.preset = e.value("preset", std::string{});
            entry.background = e.value("background", false);
            m.entries.push_back(std::move(entry));
        }
        for (const json& w : detail::field(j, "windows", "manifest")) {
            m.windows.push_back({w.at("iteration").get<std::size_t>(), w.at("vm").get<std::size_t>(),
                                 w.at("file").get<std::string>(), parse_label(w.at("label").get<std::string>())});
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::schema, "manifest '" + path + "': " + e.what());
    }
    return m;
}

std::size_t apply_labels(std::vector<ProcessActivity>& activities, const Manifest& manifest) {
    std::map<std::string, const ManifestEntry*> by_guid;
    std::map<std::string, int> guid_uses;
    std::map<std::tuple<std::string, std::int64_t, std::int64_t>, const ManifestEntry*> by_origin;
    for (const ManifestEntry& e : manifest.entries) {
        by_guid[e.process_guid] = &e;
        ++guid_uses[e.process_guid];
        by_origin[{e.machine, e.pid, to_epoch_ms(e.origin_time)}] = &e;
    }
    std::size_t unknown = 0;
    for (ProcessActivity& a : activities) {
        const ManifestEntry* hit = nullptr;
        if (auto it = by_guid.find(a.process_guid); it != by_guid.end() && guid_uses[a.process_guid] == 1) {
            hit = it->second;
        } else if (!a.events.empty() && a.events.front().event_id == 1) {
            const auto pid = a.events.front().process_id();
            if (pid) {
                if (auto jt = by_origin.find({a.machine, *pid, to_epoch_ms(a.origin_time)}); jt != by_origin.end())
                    hit = jt->second;
            }
        }
        if (hit) a.label = hit->label;
        else ++unknown;
    }
    return unknown;
}

} // namespace procsight
