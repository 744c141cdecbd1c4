#include "../io/json_util.hpp"
#include "procsight/error.hpp"
#include "procsight/ingest.hpp"

namespace procsight {

using detail::json;

namespace {

json event_to_json(const SysmonEvent& e) {
    json j = {{"event_id", e.event_id},
              {"process_guid", e.process_guid},
              {"machine", e.machine},
              {"utc_time", format_timestamp(e.utc_time)},
              {"attributes", e.attributes}};
    j["event_type"] = e.event_type ? json(*e.event_type) : json(nullptr);
    return j;
}

SysmonEvent event_from_json(const json& j) {
    constexpr std::string_view ctx = "activity event";
    SysmonEvent e;
    e.event_id = static_cast<int>(detail::int_field(j, "event_id", ctx));
    e.process_guid = detail::string_field(j, "process_guid", ctx);
    e.machine = detail::string_field(j, "machine", ctx);
    e.utc_time = parse_timestamp(detail::string_field(j, "utc_time", ctx));
    if (const auto it = j.find("event_type"); it != j.end() && it->is_string()) e.event_type = it->get<std::string>();
    if (const auto it = j.find("attributes"); it != j.end() && it->is_object())
        e.attributes = it->get<std::map<std::string, std::string>>();
    return e;
}

json hollows_to_json(const HollowsReport& r) { return json::parse(hollows_to_json_line(r)); }

} // namespace

void write_activity_store(const std::string& path, const std::vector<ProcessActivity>& activities,
                          const ArtifactStamp& stamp) {
    std::string out = json{{"format", "procsight.activities"},
                           {"format_version", kActivityStoreVersion},
                           {"count", activities.size()},
                           {"stamp", detail::stamp_to_json(stamp)}}
                          .dump();
    out += '\n';
    for (const ProcessActivity& a : activities) {
        json events = json::array();
        for (const SysmonEvent& e : a.events) events.push_back(event_to_json(e));
        json j = {{"process_guid", a.process_guid},
                  {"machine", a.machine},
                  {"origin_time", format_timestamp(a.origin_time)},
                  {"label", to_string(a.label)},
                  {"orphan", a.orphan},
                  {"events", std::move(events)}};
        j["hollows"] = a.hollows ? hollows_to_json(*a.hollows) : json(nullptr);
        out += j.dump();
        out += '\n';
    }
    detail::atomic_write(path, out);
}

std::vector<ProcessActivity> read_activity_store(const std::string& path) {
    const auto lines = detail::read_lines(path);
    if (lines.empty()) fail(ErrorKind::corruption, "'" + path + "': empty activity store");
    const json header = detail::parse_json(lines.front());
    if (header.value("format", std::string{}) != "procsight.activities")
        fail(ErrorKind::schema, "'" + path + "' is not an activity store");
    const int version = header.value("format_version", 0);
    if (version != kActivityStoreVersion)
        fail(ErrorKind::version, "activity store version " + std::to_string(version) + ", expected " +
                                     std::to_string(kActivityStoreVersion));
    const std::size_t count = header.value("count", std::size_t{0});

    std::vector<ProcessActivity> activities;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const json j = detail::parse_json(lines[i]);
        constexpr std::string_view ctx = "activity";
        ProcessActivity a;
        a.process_guid = detail::string_field(j, "process_guid", ctx);
        a.machine = detail::string_field(j, "machine", ctx);
        a.origin_time = parse_timestamp(detail::string_field(j, "origin_time", ctx));
        a.label = parse_label(detail::string_field(j, "label", ctx));
        a.orphan = j.value("orphan", false);
        for (const json& e : detail::field(j, "events", ctx)) a.events.push_back(event_from_json(e));
        if (a.events.empty()) fail(ErrorKind::schema, "activity '" + a.process_guid + "' has no events");
        if (const auto it = j.find("hollows"); it != j.end() && it->is_object())
            a.hollows = parse_hollows_line(it->dump());
        activities.push_back(std::move(a));
    }
    if (activities.size() != count)
        fail(ErrorKind::corruption, "'" + path + "': header declares " + std::to_string(count) +
                                        " activities, found " + std::to_string(activities.size()));
    return activities;
}

} // namespace procsight
