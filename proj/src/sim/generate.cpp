#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "procsight/campaign.hpp"
#include "procsight/error.hpp"

namespace procsight {

namespace {

std::string hex(Rng& rng, int digits) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s(static_cast<std::size_t>(digits), '0');
    for (char& c : s) c = kDigits[rng.below(16)];
    return s;
}

std::string random_guid(Rng& rng) {
    std::string g = "{" + hex(rng, 8) + "-" + hex(rng, 4) + "-" + hex(rng, 4) + "-" + hex(rng, 4) + "-" +
                    hex(rng, 12) + "}";
    // A real guid never has both middle groups zero; keep generated ones clear of that.
    if (is_degenerate_guid(g)) g[10] = '1';
    return g;
}

template <std::size_t N>
std::size_t weighted(Rng& rng, const std::array<double, N>& weights) {
    double total = 0;
    for (double w : weights) total += w;
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < N; ++i) {
        if (u < weights[i]) return i;
        u -= weights[i];
    }
    return N - 1;
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

SysmonEvent base_event(int id, const ProcessContext& ctx, Timestamp at) {
    SysmonEvent e;
    e.event_id = id;
    e.process_guid = ctx.process_guid;
    e.machine = ctx.machine;
    e.utc_time = at;
    e.attributes["ProcessId"] = std::to_string(ctx.pid);
    e.attributes["Image"] = ctx.image;
    return e;
}

constexpr const char* kIntegrity[] = {"High", "Low", "Medium", "System"};
constexpr const char* kRegistryKeys[] = {
    "HKLM\\SOFTWARE\\Microsoft\\Windows\\CurrentVersion\\Run",
    "HKCU\\Software\\Microsoft\\Windows\\CurrentVersion\\Explorer",
    "HKLM\\SYSTEM\\CurrentControlSet\\Services",
    "HKCU\\Software\\Classes\\CLSID",
    "HKLM\\SOFTWARE\\Policies\\Microsoft\\Windows Defender",
};

} // namespace

GeneratedProcess generate_process_events(const ProcessProfile& profile, Label label, Rng& rng,
                                         const ProcessContext& given) {
    ProcessContext ctx = given;
    if (ctx.image.empty()) ctx.image = "C:\\Users\\analyst\\AppData\\Local\\Temp\\" + profile.name + ".exe";
    require(ctx.window_end >= ctx.origin, ErrorKind::precondition, "process origin lies after the window end");

    GeneratedProcess out;
    ProcessActivity& act = out.activity;
    act.process_guid = ctx.process_guid;
    act.machine = ctx.machine;
    act.origin_time = ctx.origin;
    act.label = label;

    const std::int64_t span_ms = (ctx.window_end - ctx.origin).count();

    SysmonEvent create = base_event(1, ctx, ctx.origin);
    create.attributes["CommandLine"] = "\"" + ctx.image + "\"";
    create.attributes["User"] = "DESKTOP\\analyst";
    create.attributes["IntegrityLevel"] = kIntegrity[weighted(rng, profile.integrity_weights)];
    const bool is_signed = rng.bernoulli(profile.signed_prob);
    create.attributes["Signed"] = is_signed ? "true" : "false";
    create.attributes["SignatureStatus"] =
        is_signed ? (rng.bernoulli(profile.signature_valid_prob) ? "Valid" : "Expired") : "Unavailable";
    create.attributes["SameImageLoaded"] = rng.bernoulli(profile.same_image_loaded_prob) ? "true" : "false";
    create.attributes["Hashes"] = "SHA256=" + hex(rng, 64);
    act.events.push_back(std::move(create));

    // Lifetime: the process either outlives the window or terminates after
    // its minimum lifetime.
    std::int64_t end_ms = span_ms;
    bool terminates = false;
    if (rng.bernoulli(profile.termination_prob)) {
        const double lo = profile.min_lifetime_secs * 1000.0;
        if (lo < static_cast<double>(span_ms)) {
            end_ms = static_cast<std::int64_t>(rng.uniform(lo, static_cast<double>(span_ms)));
            terminates = true;
        }
    }

    // Offsets (ms from origin) of post-creation events, tagged network or not.
    std::vector<std::pair<std::int64_t, bool>> offsets;
    const double mix_total = profile.network_propensity + profile.registry_propensity;
    const double onset = rng.exponential(std::max(profile.onset_mean_secs, 1e-3)) * 1000.0;
    if (mix_total > 0 && profile.event_rate > 0) {
        for (double t = onset; t < static_cast<double>(end_ms); t += rng.exponential(1.0 / profile.event_rate) * 1000.0)
            offsets.emplace_back(static_cast<std::int64_t>(t), rng.uniform() * mix_total < profile.network_propensity);
    }
    if (profile.beacon_period_secs > 0 && profile.network_propensity > 0) {
        const double period = profile.beacon_period_secs * 1000.0;
        for (double t = onset; t < static_cast<double>(end_ms); t += period) {
            const double jittered = t + rng.normal(0.0, 0.05 * period);
            if (jittered > 0 && jittered < static_cast<double>(end_ms))
                offsets.emplace_back(static_cast<std::int64_t>(jittered), true);
        }
    }
    std::sort(offsets.begin(), offsets.end());

    std::int64_t last = 0;
    for (auto [offset, network] : offsets) {
        offset = std::max(offset, last + 1); // strictly increasing timestamps
        if (offset >= end_ms) break;
        last = offset;
        const Timestamp at = ctx.origin + Millis{offset};
        if (network) {
            SysmonEvent e = base_event(3, ctx, at);
            e.attributes["Protocol"] = rng.bernoulli(profile.tcp_share) ? "tcp" : "udp";
            e.attributes["Initiated"] = "true";
            switch (weighted(rng, profile.port_weights)) {
            case 0:
                e.attributes["DestinationPort"] = "80";
                e.attributes["DestinationPortName"] = "http";
                break;
            case 1:
                e.attributes["DestinationPort"] = "443";
                e.attributes["DestinationPortName"] = "https";
                break;
            default:
                e.attributes["DestinationPort"] = std::to_string(rng.between(1024, 65535));
                e.attributes["DestinationPortName"] = "-";
                break;
            }
            e.attributes["DestinationIp"] = "10." + std::to_string(rng.between(0, 255)) + "." +
                                            std::to_string(rng.between(0, 255)) + "." +
                                            std::to_string(rng.between(1, 254));
            act.events.push_back(std::move(e));
        } else if (rng.bernoulli(profile.set_value_share)) {
            SysmonEvent e = base_event(13, ctx, at);
            e.event_type = "SetValue";
            e.attributes["TargetObject"] = std::string(kRegistryKeys[rng.below(5)]) + "\\" + hex(rng, 6);
            e.attributes["Details"] = "DWORD (0x0000000" + std::to_string(rng.between(0, 9)) + ")";
            act.events.push_back(std::move(e));
        } else {
            SysmonEvent e = base_event(12, ctx, at);
            e.event_type = rng.bernoulli(profile.delete_value_share) ? "DeleteValue" : "CreateKey";
            e.attributes["TargetObject"] = std::string(kRegistryKeys[rng.below(5)]) + "\\" + hex(rng, 6);
            act.events.push_back(std::move(e));
        }
    }

    if (terminates) {
        const std::int64_t at = std::max(end_ms, last + 1);
        if (at <= span_ms) act.events.push_back(base_event(5, ctx, ctx.origin + Millis{at}));
    }

    if (profile.filtered_event_rate > 0) {
        for (double t = rng.exponential(1.0 / profile.filtered_event_rate) * 1000.0; t < static_cast<double>(end_ms);
             t += rng.exponential(1.0 / profile.filtered_event_rate) * 1000.0) {
            static constexpr int kIds[] = {7, 11, 22};
            const int id = kIds[rng.below(3)];
            SysmonEvent e = base_event(id, ctx, ctx.origin + Millis{static_cast<std::int64_t>(t)});
            if (id == 7) {
                e.attributes["ImageLoaded"] = "C:\\Windows\\System32\\" + hex(rng, 6) + ".dll";
                e.attributes["Signed"] = "true";
                e.attributes["SignatureStatus"] = "Valid";
            } else if (id == 11) {
                e.attributes["TargetFilename"] = "C:\\Users\\analyst\\AppData\\Local\\Temp\\" + hex(rng, 8) + ".tmp";
            } else {
                e.attributes["QueryName"] = hex(rng, 10) + ".example.net";
            }
            out.filtered_noise.push_back(std::move(e));
        }
    }

    if (label == Label::malicious && rng.bernoulli(profile.hollows_prob)) {
        HollowsReport r;
        r.pid = ctx.pid;
        r.machine = ctx.machine;
        const double lo = std::min(5000.0, static_cast<double>(span_ms));
        r.scan_time = ctx.origin + Millis{static_cast<std::int64_t>(rng.uniform(lo, static_cast<double>(span_ms)))};
        std::int64_t* fields[] = {&r.replaced,  &r.hdr_modified,  &r.total_modified,   &r.patched,
                                  &r.iat_hooked, &r.implanted_shc, &r.unreachable_file, &r.implanted_pe};
        const auto hits = rng.between(1, 3);
        for (std::int64_t k = 0; k < hits; ++k) *fields[rng.below(8)] += rng.between(1, 5);
        r.total_modified = std::max(r.total_modified, r.patched + r.hdr_modified);
        act.hollows = r;
    }
    return out;
}

MachineSeries generate_machine_series(std::span<const HostedProcess> hosted, Rng& rng, Timestamp window_start,
                                      std::int64_t window_secs) {
    require(window_secs > 0, ErrorKind::precondition, "window_secs must be > 0");
    struct Load {
        const ProcessProfile* profile;
        double start, end, onset; // seconds from window start
        double intensity;
        std::int64_t pid;
        std::vector<std::pair<double, int>> events; // (second, id)
    };
    MachineSeries series;
    series.label = Label::benign;
    std::vector<Load> loads;
    for (const HostedProcess& h : hosted) {
        const ProcessActivity& a = *h.activity;
        if (series.machine.empty()) series.machine = a.machine;
        require(a.machine == series.machine, ErrorKind::precondition, "hosted activities span several VMs");
        if (a.label == Label::malicious) series.label = Label::malicious;
        Load l{h.profile, 0, static_cast<double>(window_secs), static_cast<double>(window_secs), 1.0, 0, {}};
        l.start = static_cast<double>((a.origin_time - window_start).count()) / 1000.0;
        l.intensity = rng.uniform(0.7, 1.3);
        for (const SysmonEvent& e : a.events) {
            const double at = static_cast<double>((e.utc_time - window_start).count()) / 1000.0;
            if (e.event_id == 1) {
                l.pid = e.process_id().value_or(0);
            } else if (e.event_id == 5) {
                l.end = at;
            } else {
                l.onset = std::min(l.onset, at);
                l.events.emplace_back(at, e.event_id);
            }
        }
        loads.push_back(std::move(l));
    }

    series.snapshots.reserve(static_cast<std::size_t>(window_secs));
    for (std::int64_t s = 0; s < window_secs; ++s) {
        MachineSnapshot snap;
        snap.t = s;
        snap.cpu_system_pct = std::max(0.0, rng.normal(2.0, 0.6));
        snap.cpu_user_pct = std::max(0.0, rng.normal(4.0, 1.5));
        snap.mem_used = 1800.0 + rng.normal(0.0, 8.0);
        snap.swap_used = 150.0 + std::abs(rng.normal(0.0, 1.0));
        snap.total_procs = 62.0 + static_cast<double>(rng.between(0, 2));
        snap.max_pid = 9000.0 + 4.0 * static_cast<double>(rng.between(0, 40));
        snap.bytes_sent = rng.exponential(250.0);
        snap.bytes_recv = rng.exponential(700.0);

        const double lo = static_cast<double>(s), hi = lo + 1.0;
        for (const Load& l : loads) {
            const double frac = std::max(0.0, std::min(hi, l.end) - std::max(lo, l.start));
            if (frac <= 0) continue;
            const ProcessProfile& p = *l.profile;
            const bool active = lo + 0.5 >= l.onset;
            const double level = (active ? 1.0 : 0.35) * l.intensity * frac;
            snap.cpu_user_pct += level * p.cpu_user + frac * std::abs(rng.normal(0.0, p.cpu_jitter));
            snap.cpu_system_pct += level * p.cpu_system;
            snap.mem_used += frac * l.intensity * p.mem_mb;
            snap.total_procs += 1.0 + (active ? p.child_procs : 0);
            const double top = static_cast<double>(l.pid) + (active ? 4.0 * p.child_procs + 8000.0 * (p.child_procs > 0) : 0);
            snap.max_pid = std::max(snap.max_pid, top);
            snap.bytes_sent += 0.3 * frac * l.intensity * p.steady_bytes_rate;
            snap.bytes_recv += 0.7 * frac * l.intensity * p.steady_bytes_rate;
            for (const auto& [at, id] : l.events) {
                if (at < lo || at >= hi) continue;
                if (id == 3) {
                    const double bytes = p.bytes_per_connection * rng.uniform(0.5, 1.5);
                    snap.bytes_sent += 0.3 * bytes;
                    snap.bytes_recv += 0.7 * bytes;
                } else {
                    snap.cpu_system_pct += 0.5;
                }
            }
        }
        const double busy = snap.cpu_user_pct + snap.cpu_system_pct;
        if (busy > 100.0) {
            snap.cpu_user_pct *= 100.0 / busy;
            snap.cpu_system_pct *= 100.0 / busy;
        }
        snap.pkts_sent = std::round(snap.bytes_sent / 500.0 + std::abs(rng.normal(0.0, 1.0)));
        snap.pkts_recv = std::round(snap.bytes_recv / 1200.0 + std::abs(rng.normal(0.0, 1.0)));
        series.snapshots.push_back(snap);
    }
    return series;
}

std::string machine_name(std::size_t vm) { return "DESKTOP-VM" + std::to_string(vm + 1); }

CampaignDataset generate_dataset(const CampaignConfig& config) {
    CampaignDataset data;
    data.config = config;
    data.plans = schedule_campaign(config);

    // Per-VM Sysmon build: a degenerate VM reuses one zero-middle guid for
    // every process, as the unpatched sensor does.
    std::vector<std::string> degenerate_guid(config.n_vms);
    {
        Rng vm_rng(derive_seed(config.seed, 0xD06));
        for (std::size_t vm = 0; vm < config.n_vms; ++vm) {
            const bool degenerate = vm_rng.bernoulli(config.degenerate_guid_fraction);
            const std::string first = hex(vm_rng, 8), tail = hex(vm_rng, 4) + "-" + hex(vm_rng, 12);
            if (degenerate) degenerate_guid[vm] = "{" + first + "-0000-0000-" + tail + "}";
        }
    }

    const Millis window{config.window_secs * 1000};
    for (const IterationPlan& plan : data.plans) {
        Rng rng(derive_seed(config.seed, 1'000'000 + plan.index));
        const Timestamp window_end = plan.start_time + window;
        for (const Assignment& a : plan.assignments) {
            const std::string machine = machine_name(a.vm);
            std::set<std::int64_t> pids;
            const auto next_pid = [&] {
                std::int64_t pid;
                do {
                    pid = 4 * rng.between(250, 3000);
                } while (!pids.insert(pid).second);
                return pid;
            };
            const auto next_guid = [&] {
                return degenerate_guid[a.vm].empty() ? random_guid(rng) : degenerate_guid[a.vm];
            };

            // The sample's generator preset is a property of the sample, so a
            // re-executed benign sample keeps its preset.
            Rng preset_rng(derive_seed(config.seed, fnv1a(a.sample_id)));
            const ProfileMix& mix = a.label == Label::malicious ? config.malicious : config.benign;
            const ProcessProfile& profile = mix.pick(preset_rng);

            std::vector<std::pair<GeneratedProcess, const ProcessProfile*>> hosted_here;
            std::vector<ManifestEntry> entries;
            {
                ProcessContext ctx{machine, next_guid(), next_pid(),
                                   plan.start_time + Millis{rng.between(0, 800)}, window_end,
                                   "C:\\Users\\analyst\\Desktop\\samples\\" + a.sample_id + ".exe"};
                hosted_here.emplace_back(generate_process_events(profile, a.label, rng, ctx), &profile);
                entries.push_back({plan.index, a.vm, machine, a.sample_id, ctx.process_guid, ctx.pid, ctx.origin,
                                   a.label, profile.name, false});
            }
            if (config.background_noise) {
                const auto n = rng.between(static_cast<std::int64_t>(config.background_min),
                                           static_cast<std::int64_t>(config.background_max));
                for (std::int64_t k = 0; k < n; ++k) {
                    const ProcessProfile& bg = config.background.pick(rng);
                    ProcessContext ctx{machine, next_guid(), next_pid(),
                                       plan.start_time + Millis{rng.between(0, 20'000)}, window_end,
                                       "C:\\Program Files\\Office\\" + bg.name + ".exe"};
                    hosted_here.emplace_back(generate_process_events(bg, Label::benign, rng, ctx), &bg);
                    entries.push_back(
                        {plan.index, a.vm, machine, "", ctx.process_guid, ctx.pid, ctx.origin, Label::benign, bg.name, true});
                }
            }

            std::vector<HostedProcess> hosted;
            for (const auto& [gp, p] : hosted_here) hosted.push_back({&gp.activity, p});
            MachineSeries series = generate_machine_series(hosted, rng, plan.start_time, config.window_secs);
            char id[48];
            std::snprintf(id, sizeof id, "iter%04zu-vm%zu", plan.index, a.vm + 1);
            series.window_id = id;
            series.machine = machine;
            data.windows.push_back({plan.index, a.vm, std::string("machine/") + id + ".csv", series.label});
            data.machine_series.push_back(std::move(series));

            for (auto& [gp, p] : hosted_here) {
                data.events.insert(data.events.end(), gp.activity.events.begin(), gp.activity.events.end());
                data.events.insert(data.events.end(), gp.filtered_noise.begin(), gp.filtered_noise.end());
                if (gp.activity.hollows) data.reports.push_back(*gp.activity.hollows);
                data.activities.push_back(std::move(gp.activity));
            }
            data.manifest.insert(data.manifest.end(), entries.begin(), entries.end());
        }
    }

    // The collector's dump is unordered.
    Rng shuffle_rng(derive_seed(config.seed, 0x5AFF));
    shuffle_rng.shuffle(std::span<SysmonEvent>(data.events));
    return data;
}

} // namespace procsight
