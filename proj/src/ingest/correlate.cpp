#include <algorithm>
#include <numeric>
#include <tuple>
#include <unordered_map>

#include "procsight/ingest.hpp"

namespace procsight {

namespace {

bool all_zero(std::string_view group) {
    return !group.empty() && std::all_of(group.begin(), group.end(), [](char c) { return c == '0'; });
}

std::int64_t bucket_of(Timestamp t) {
    const std::int64_t ms = to_epoch_ms(t);
    const std::int64_t width = kCollisionBucket.count();
    return ms >= 0 ? ms / width : -((-ms + width - 1) / width);
}

} // namespace

bool is_degenerate_guid(std::string_view guid) noexcept {
    if (guid.size() >= 2 && guid.front() == '{' && guid.back() == '}') guid = guid.substr(1, guid.size() - 2);
    std::string_view groups[5];
    std::size_t n = 0;
    while (n < 5) {
        const auto dash = guid.find('-');
        groups[n++] = guid.substr(0, dash);
        if (dash == std::string_view::npos) break;
        guid.remove_prefix(dash + 1);
    }
    if (n != 5 || guid.find('-') != std::string_view::npos) return false;
    return all_zero(groups[1]) && all_zero(groups[2]);
}

GuidRepair resolve_guid_collisions(const std::vector<SysmonEvent>& events) {
    GuidRepair out{events, 0};

    // Group degenerate events by (machine, guid, pid). Each creation event opens
    // a new process instance; later events of the group join the latest one.
    using GroupKey = std::tuple<std::string, std::string, std::string>;
    std::map<GroupKey, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const SysmonEvent& e = events[i];
        if (!is_degenerate_guid(e.process_guid)) continue;
        const auto pid = e.process_id();
        groups[{e.machine, e.process_guid, pid ? std::to_string(*pid) : std::string("na")}].push_back(i);
    }

    std::map<std::string, std::size_t> issued; // base key -> instances already named
    for (auto& [key, members] : groups) {
        std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
            return events[a].utc_time < events[b].utc_time;
        });
        const auto& [machine, guid, pid] = key;
        std::string current;
        for (const std::size_t idx : members) {
            const SysmonEvent& e = events[idx];
            if (e.event_id == 1 || current.empty()) {
                const std::string base = machine + "-" + pid + "-" + std::to_string(bucket_of(e.utc_time));
                const std::size_t ordinal = issued[base]++;
                current = "{SYN-" + base + (ordinal ? "-" + std::to_string(ordinal) : std::string()) + "}";
            }
            out.events[idx].process_guid = current;
            ++out.rewritten;
        }
    }
    return out;
}

std::vector<ProcessActivity> correlate(const std::vector<SysmonEvent>& events) {
    std::unordered_map<std::string, std::vector<std::size_t>> by_guid;
    for (std::size_t i = 0; i < events.size(); ++i) by_guid[events[i].process_guid].push_back(i);

    std::vector<ProcessActivity> activities;
    activities.reserve(by_guid.size());
    for (auto& [guid, members] : by_guid) {
        std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
            return events[a].utc_time < events[b].utc_time;
        });
        ProcessActivity act;
        act.process_guid = guid;
        act.events.reserve(members.size());
        for (const std::size_t idx : members) act.events.push_back(events[idx]);
        act.machine = act.events.front().machine;
        act.origin_time = act.events.front().utc_time;
        act.orphan = act.events.front().event_id != 1;
        activities.push_back(std::move(act));
    }
    std::sort(activities.begin(), activities.end(), [](const ProcessActivity& a, const ProcessActivity& b) {
        return std::tie(a.origin_time, a.process_guid) < std::tie(b.origin_time, b.process_guid);
    });
    return activities;
}

HollowsJoin attach_hollows(std::vector<ProcessActivity> activities, const std::vector<HollowsReport>& reports,
                           Millis window) {
    // (machine, pid) -> indices of non-orphan activities
    std::map<std::pair<std::string, std::int64_t>, std::vector<std::size_t>> index;
    for (std::size_t i = 0; i < activities.size(); ++i) {
        const ProcessActivity& a = activities[i];
        if (a.orphan) continue;
        if (const auto pid = a.events.front().process_id()) index[{a.machine, *pid}].push_back(i);
    }

    // Each report goes to the candidate whose origin is closest before the scan.
    constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    std::vector<std::size_t> target(reports.size(), kNone);
    for (std::size_t r = 0; r < reports.size(); ++r) {
        const HollowsReport& rep = reports[r];
        const auto it = index.find({rep.machine, rep.pid});
        if (it == index.end()) continue;
        for (const std::size_t a : it->second) {
            const Timestamp origin = activities[a].origin_time;
            if (rep.scan_time < origin || rep.scan_time > origin + window) continue;
            if (target[r] == kNone || origin > activities[target[r]].origin_time) target[r] = a;
        }
    }

    // Per activity, keep the report with the smallest scan delay.
    std::vector<std::size_t> winner(activities.size(), kNone);
    for (std::size_t r = 0; r < reports.size(); ++r) {
        if (target[r] == kNone) continue;
        std::size_t& w = winner[target[r]];
        if (w == kNone || reports[r].scan_time < reports[w].scan_time) w = r;
    }

    HollowsJoin out;
    std::vector<bool> used(reports.size(), false);
    for (std::size_t a = 0; a < activities.size(); ++a) {
        if (winner[a] == kNone) continue;
        activities[a].hollows = reports[winner[a]];
        used[winner[a]] = true;
    }
    for (std::size_t r = 0; r < reports.size(); ++r)
        if (!used[r]) out.unmatched.push_back(reports[r]);
    out.activities = std::move(activities);
    return out;
}

} // namespace procsight
