#include <algorithm>
#include <fstream>

#include "../io/json_util.hpp"
#include "procsight/error.hpp"
#include "procsight/ingest.hpp"

namespace procsight {

using detail::json;

bool is_collected_event(int event_id) noexcept {
    return std::find(std::begin(kCollectedEventIds), std::end(kCollectedEventIds), event_id) !=
           std::end(kCollectedEventIds);
}

bool is_analysis_event(int event_id) noexcept {
    return std::find(std::begin(kAnalysisEventIds), std::end(kAnalysisEventIds), event_id) !=
           std::end(kAnalysisEventIds);
}

std::optional<std::int64_t> SysmonEvent::process_id() const {
    const auto it = attributes.find("ProcessId");
    if (it == attributes.end() || it->second.empty()) return std::nullopt;
    try {
        std::size_t used = 0;
        const long long pid = std::stoll(it->second, &used, 0);
        if (used != it->second.size()) return std::nullopt;
        return pid;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

const char* to_string(Label label) noexcept {
    switch (label) {
    case Label::benign: return "benign";
    case Label::malicious: return "malicious";
    case Label::unknown: return "unknown";
    }
    return "unknown";
}

Label parse_label(std::string_view text) {
    if (text == "benign") return Label::benign;
    if (text == "malicious") return Label::malicious;
    if (text == "unknown") return Label::unknown;
    fail(ErrorKind::schema, "unknown label '" + std::string(text) + "'");
}

namespace {

// Fields lifted out of EventData/System into dedicated SysmonEvent members.
constexpr std::string_view kLiftedFields[] = {"EventID", "Computer", "ProcessGuid", "UtcTime", "EventType",
                                              "TimeCreated"};

bool is_lifted(std::string_view key) {
    return std::find(std::begin(kLiftedFields), std::end(kLiftedFields), key) != std::end(kLiftedFields);
}

const json* find(const json& object, const char* key) {
    if (!object.is_object()) return nullptr;
    const auto it = object.find(key);
    return it == object.end() ? nullptr : &*it;
}

std::optional<int> read_event_id(const json& value) {
    if (value.is_number_integer()) return value.get<int>();
    if (value.is_string()) {
        const std::string s = value.get<std::string>();
        try {
            std::size_t used = 0;
            const int id = std::stoi(s, &used);
            if (used == s.size()) return id;
        } catch (const std::exception&) {
        }
        return std::nullopt;
    }
    // evtx_dump renders qualified IDs as {"#attributes":{...},"#text":N}.
    if (const json* text = find(value, "#text")) return read_event_id(*text);
    return std::nullopt;
}

std::optional<std::string> read_scalar(const json& value) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
    if (value.is_number()) return value.dump();
    return std::nullopt;
}

} // namespace

SysmonEvent parse_event_line(std::string_view line) {
    const json root = detail::parse_json(line);
    if (!root.is_object()) throw ParseError("event line is not a JSON object", 0);

    const json* event = find(root, "Event");
    const json& base = event ? *event : root;
    const json* system_ptr = find(base, "System");
    const json* data_ptr = find(base, "EventData");
    const json& system = system_ptr ? *system_ptr : base;
    const json& data = data_ptr && data_ptr->is_object() ? *data_ptr : base;

    SysmonEvent out;

    const json* id_value = find(system, "EventID");
    if (!id_value) id_value = find(data, "EventID");
    if (!id_value) fail(ErrorKind::schema, "missing field 'EventID'");
    const auto id = read_event_id(*id_value);
    if (!id) fail(ErrorKind::schema, "field 'EventID' is not an integer");
    out.event_id = *id;
    if (!is_collected_event(out.event_id))
        fail(ErrorKind::unsupported, "event ID " + std::to_string(out.event_id) + " is not in the collected set");

    std::optional<std::string> time_text;
    if (const json* t = find(data, "UtcTime"); t && t->is_string()) {
        time_text = t->get<std::string>();
    } else if (const json* created = find(system, "TimeCreated")) {
        if (created->is_string()) {
            time_text = created->get<std::string>();
        } else if (const json* attrs = find(*created, "#attributes")) {
            if (const json* st = find(*attrs, "SystemTime"); st && st->is_string()) time_text = st->get<std::string>();
        }
    }
    if (!time_text) fail(ErrorKind::schema, "missing field 'UtcTime'");
    out.utc_time = parse_timestamp(*time_text);

    const json* computer = find(system, "Computer");
    if (!computer) computer = find(data, "Computer");
    if (!computer || !computer->is_string() || computer->get<std::string>().empty())
        fail(ErrorKind::schema, "missing field 'Computer'");
    out.machine = computer->get<std::string>();

    const json* guid = find(data, "ProcessGuid");
    const char* guid_field = "ProcessGuid";
    if (!guid && out.event_id == 8) {
        // CreateRemoteThread records only carry source/target guids.
        guid = find(data, "SourceProcessGuid");
        guid_field = "SourceProcessGuid";
    }
    if (!guid || !guid->is_string() || guid->get<std::string>().empty())
        fail(ErrorKind::schema, std::string("event ID ") + std::to_string(out.event_id) + ": missing field '" +
                                    guid_field + "'");
    out.process_guid = guid->get<std::string>();

    if (const json* et = find(data, "EventType"); et && et->is_string()) out.event_type = et->get<std::string>();

    if (data.is_object()) {
        for (const auto& [key, value] : data.items()) {
            if (is_lifted(key)) continue;
            if (auto scalar = read_scalar(value)) out.attributes.emplace(key, std::move(*scalar));
        }
    }
    return out;
}

HollowsReport parse_hollows_line(std::string_view line) {
    const json j = detail::parse_json(line);
    constexpr std::string_view ctx = "hollows report";
    HollowsReport r;
    r.pid = detail::int_field(j, "pid", ctx);
    r.machine = detail::string_field(j, "machine", ctx);
    r.scan_time = parse_timestamp(detail::string_field(j, "scan_time", ctx));
    auto count = [&](const char* name) {
        // Counts absent from a report mean the scanner found nothing of that kind.
        const std::int64_t v = j.contains(name) ? detail::int_field(j, name, ctx) : 0;
        if (v < 0) fail(ErrorKind::schema, std::string("hollows report: negative count '") + name + "'");
        return v;
    };
    r.is_managed = count("is_managed");
    r.replaced = count("replaced");
    r.hdr_modified = count("hdr_modified");
    r.total_modified = count("total_modified");
    r.patched = count("patched");
    r.iat_hooked = count("iat_hooked");
    r.implanted_shc = count("implanted_shc");
    r.unreachable_file = count("unreachable_file");
    r.other = count("other");
    r.implanted_pe = count("implanted_pe");
    return r;
}

std::vector<SysmonEvent> filter_events(const std::vector<SysmonEvent>& events) {
    std::vector<SysmonEvent> kept;
    std::copy_if(events.begin(), events.end(), std::back_inserter(kept),
                 [](const SysmonEvent& e) { return is_analysis_event(e.event_id); });
    return kept;
}

std::vector<SysmonEvent> read_event_file(const std::string& path, EventReadStats* stats) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
    std::vector<SysmonEvent> events;
    EventReadStats local;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        ++local.lines;
        try {
            events.push_back(parse_event_line(line));
            ++local.parsed;
        } catch (const ParseError& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what(), e.byte_offset());
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::unsupported) {
                ++local.unsupported;
                continue;
            }
            throw Error(e.kind(), path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (stats) *stats = local;
    return events;
}

std::vector<HollowsReport> read_hollows_file(const std::string& path) {
    std::vector<HollowsReport> reports;
    std::size_t line_no = 0;
    for (const std::string& line : detail::read_lines(path)) {
        ++line_no;
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            reports.push_back(parse_hollows_line(line));
        } catch (const ParseError& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what(), e.byte_offset());
        } catch (const Error& e) {
            throw Error(e.kind(), path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return reports;
}

std::string event_to_json_line(const SysmonEvent& event) {
    json data = json::object();
    data["UtcTime"] = format_timestamp(event.utc_time);
    data["ProcessGuid"] = event.process_guid;
    if (event.event_type) data["EventType"] = *event.event_type;
    for (const auto& [key, value] : event.attributes) data[key] = value;

    std::string iso = format_timestamp(event.utc_time);
    iso[10] = 'T';
    json system = {{"EventID", event.event_id},
                   {"Computer", event.machine},
                   {"TimeCreated", {{"#attributes", {{"SystemTime", iso + "Z"}}}}}};
    return json{{"Event", {{"System", std::move(system)}, {"EventData", std::move(data)}}}}.dump();
}

std::string hollows_to_json_line(const HollowsReport& r) {
    return json{{"pid", r.pid},
                {"machine", r.machine},
                {"scan_time", format_timestamp(r.scan_time)},
                {"is_managed", r.is_managed},
                {"replaced", r.replaced},
                {"hdr_modified", r.hdr_modified},
                {"total_modified", r.total_modified},
                {"patched", r.patched},
                {"iat_hooked", r.iat_hooked},
                {"implanted_shc", r.implanted_shc},
                {"unreachable_file", r.unreachable_file},
                {"other", r.other},
                {"implanted_pe", r.implanted_pe}}
        .dump();
}

} // namespace procsight
