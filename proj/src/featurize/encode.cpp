#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "../io/json_util.hpp"
#include "procsight/error.hpp"
#include "procsight/featurize.hpp"

namespace procsight {

namespace {

using K = ColumnKind;

constexpr FeatureColumn kEventOnlyColumns[] = {
    {"EventID_1", K::one_hot_member}, {"EventID_3", K::one_hot_member}, {"EventID_5", K::one_hot_member},
    {"EventID_12", K::one_hot_member}, {"EventID_13", K::one_hot_member},
};

constexpr FeatureColumn kCompleteColumns[] = {
    {"is_managed", K::count},
    {"replaced", K::count},
    {"hdr_modified", K::count},
    {"total_modified", K::count},
    {"patched", K::count},
    {"iat_hooked", K::count},
    {"implanted_shc", K::count},
    {"unreachable_file", K::count},
    {"other", K::count},
    {"implanted_pe", K::count},
    {"SameImageLoaded", K::binary_flag},
    {"SignatureStatus", K::binary_flag},
    {"Signed", K::binary_flag},
    {"Signed_Failed", K::binary_flag},
    {"Protocol_udp", K::one_hot_member},
    {"Protocol_tcp", K::one_hot_member},
    {"DPortName_http", K::one_hot_member},
    {"DPortName_https", K::one_hot_member},
    {"DPortName_other", K::one_hot_member},
    {"IntegrityLevel_High", K::one_hot_member},
    {"IntegrityLevel_Low", K::one_hot_member},
    {"IntegrityLevel_Medium", K::one_hot_member},
    {"IntegrityLevel_System", K::one_hot_member},
    {"EventID_1", K::one_hot_member},
    {"EventID_3", K::one_hot_member},
    {"EventID_5", K::one_hot_member},
    {"EventID_12", K::one_hot_member},
    {"EventID_13", K::one_hot_member},
    {"EventType_DeleteValue", K::one_hot_member},
    {"EventType_SetValue", K::one_hot_member},
    {"timestamp_ms", K::milliseconds},
};

constexpr FeatureColumn kMachineColumns[] = {
    {"cpu_system", K::real}, {"cpu_user", K::real},   {"mem", K::real},        {"swap", K::real},
    {"total_procs", K::real}, {"max_pid", K::real},   {"bytes_sent", K::real}, {"bytes_recv", K::real},
    {"pkts_sent", K::real},  {"pkts_recv", K::real},
};

static_assert(std::size(kEventOnlyColumns) == 5);
static_assert(std::size(kCompleteColumns) == 31);
static_assert(std::size(kMachineColumns) == 10);

const FeatureSchema kSchemas[] = {
    {SchemaId::event_only_5, kEventOnlyColumns},
    {SchemaId::complete_31, kCompleteColumns},
    {SchemaId::machine_10, kMachineColumns},
};

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

const std::string* attr(const SysmonEvent& e, const char* name) {
    const auto it = e.attributes.find(name);
    return it == e.attributes.end() ? nullptr : &it->second;
}

bool truthy(const std::string& v) {
    const std::string s = lower(v);
    return s == "true" || s == "1" || s == "yes";
}

bool falsy(const std::string& v) {
    const std::string s = lower(v);
    return s == "false" || s == "0" || s == "no" || s == "failed";
}

std::optional<std::size_t> event_slot(int event_id) {
    switch (event_id) {
    case 1: return 0;
    case 3: return 1;
    case 5: return 2;
    case 12: return 3;
    case 13: return 4;
    default: return std::nullopt;
    }
}

std::size_t require_event_slot(const SysmonEvent& e) {
    const auto slot = event_slot(e.event_id);
    if (!slot)
        fail(ErrorKind::schema, "event ID " + std::to_string(e.event_id) + " of '" + e.process_guid +
                                    "' is outside the analysis set");
    return *slot;
}

FeatureSequence empty_sequence(SchemaId schema, const ProcessActivity& activity) {
    FeatureSequence seq;
    seq.schema = schema;
    seq.width = schema_width(schema);
    seq.label = activity.label;
    seq.source_id = activity.process_guid;
    seq.values.reserve(activity.events.size() * seq.width);
    seq.times_ms.reserve(activity.events.size());
    return seq;
}

} // namespace

const FeatureSchema& schema_for(SchemaId id) { return kSchemas[static_cast<std::size_t>(id)]; }

std::size_t schema_width(SchemaId id) { return schema_for(id).width(); }

const char* to_string(SchemaId id) noexcept {
    switch (id) {
    case SchemaId::event_only_5: return "event_only_5";
    case SchemaId::complete_31: return "complete_31";
    case SchemaId::machine_10: return "machine_10";
    }
    return "?";
}

const char* to_string(ColumnKind kind) noexcept {
    switch (kind) {
    case K::binary_flag: return "binary-flag";
    case K::one_hot_member: return "one-hot-member";
    case K::count: return "count";
    case K::milliseconds: return "milliseconds";
    case K::real: return "real";
    }
    return "?";
}

SchemaId parse_schema_id(std::string_view text) {
    if (text == "event_only_5" || text == "event_only") return SchemaId::event_only_5;
    if (text == "complete_31" || text == "complete") return SchemaId::complete_31;
    if (text == "machine_10" || text == "machine") return SchemaId::machine_10;
    fail(ErrorKind::config, "unknown schema id '" + std::string(text) + "'");
}

bool is_process_schema(SchemaId id) noexcept { return id != SchemaId::machine_10; }

std::string schema_registry_json() {
    detail::json schemas = detail::json::array();
    for (const FeatureSchema& s : kSchemas) {
        detail::json cols = detail::json::array();
        for (const FeatureColumn& c : s.columns)
            cols.push_back({{"name", std::string(c.name)}, {"kind", to_string(c.kind)}});
        schemas.push_back({{"schema_id", to_string(s.id)}, {"width", s.width()}, {"columns", std::move(cols)}});
    }
    return detail::json{{"format", "procsight.schemas"},
                        {"format_version", kSchemaRegistryVersion},
                        {"schemas", std::move(schemas)}}
        .dump(2);
}

std::int64_t relative_timestamp(const SysmonEvent& event, Timestamp origin) {
    if (event.utc_time < origin)
        fail(ErrorKind::ordering, "event at " + format_timestamp(event.utc_time) + " precedes origin " +
                                      format_timestamp(origin));
    return (event.utc_time - origin).count();
}

FeatureSequence encode_event_only(const ProcessActivity& activity) {
    FeatureSequence seq = empty_sequence(SchemaId::event_only_5, activity);
    for (const SysmonEvent& e : activity.events) {
        const std::size_t slot = require_event_slot(e);
        std::array<double, 5> row{};
        row[slot] = 1.0;
        seq.values.insert(seq.values.end(), row.begin(), row.end());
        seq.times_ms.push_back(relative_timestamp(e, activity.origin_time));
    }
    return seq;
}

FeatureSequence encode_complete(const ProcessActivity& activity, const EncodeOptions& options,
                                EncodeDiagnostics* diagnostics) {
    namespace col = complete_col;
    FeatureSequence seq = empty_sequence(SchemaId::complete_31, activity);

    std::array<double, 10> hollows{};
    if (activity.hollows) {
        const auto counts = activity.hollows->counts();
        std::transform(counts.begin(), counts.end(), hollows.begin(),
                       [](std::int64_t c) { return static_cast<double>(c); });
    }

    for (const SysmonEvent& e : activity.events) {
        std::array<double, 31> row{};
        std::copy(hollows.begin(), hollows.end(), row.begin() + col::hollows_first);

        if (const auto* v = attr(e, "SameImageLoaded"); v && truthy(*v)) row[col::same_image_loaded] = 1;
        if (const auto* v = attr(e, "SignatureStatus"); v && lower(*v) == "valid") row[col::signature_status] = 1;
        if (const auto* v = attr(e, "Signed")) {
            if (truthy(*v)) row[col::signed_flag] = 1;
            else if (falsy(*v)) row[col::signed_failed] = 1;
        }

        if (const auto* v = attr(e, "Protocol")) {
            const std::string p = lower(*v);
            if (p == "udp") row[col::protocol_udp] = 1;
            else if (p == "tcp") row[col::protocol_tcp] = 1;
        }

        if (e.event_id == 3) {
            const auto* v = attr(e, "DestinationPortName");
            const std::string port = v ? lower(*v) : std::string();
            if (port == "http") {
                row[col::dport_http] = 1;
            } else if (port == "https") {
                row[col::dport_https] = 1;
            } else {
                row[col::dport_other] = 1;
                if (diagnostics) ++diagnostics->unknown_port_names;
            }
        }

        if (const auto* v = attr(e, "IntegrityLevel")) {
            const std::string level = lower(*v);
            if (level == "high") row[col::integrity_first + 0] = 1;
            else if (level == "low") row[col::integrity_first + 1] = 1;
            else if (level == "medium") row[col::integrity_first + 2] = 1;
            else if (level == "system") row[col::integrity_first + 3] = 1;
            else if (diagnostics) ++diagnostics->unknown_integrity;
        }

        row[col::event_id_first + require_event_slot(e)] = 1;

        if (e.event_type == "DeleteValue") row[col::event_type_delete] = 1;
        else if (e.event_type == "SetValue") row[col::event_type_set] = 1;

        const std::int64_t rel = relative_timestamp(e, activity.origin_time);
        row[col::timestamp] = options.scale_timestamps ? static_cast<double>(rel) / kTimestampScale
                                                       : static_cast<double>(rel);

        seq.values.insert(seq.values.end(), row.begin(), row.end());
        seq.times_ms.push_back(rel);
    }
    return seq;
}

FeatureSequence encode_machine(const MachineSeries& series, const NormalizationStats* stats) {
    FeatureSequence seq;
    seq.schema = SchemaId::machine_10;
    seq.width = 10;
    seq.label = series.label;
    seq.source_id = series.machine + "/" + series.window_id;
    seq.values.reserve(series.snapshots.size() * 10);
    std::int64_t previous = -1;
    for (const MachineSnapshot& s : series.snapshots) {
        if (s.t <= previous || s.t < 0)
            fail(ErrorKind::ordering, "machine series '" + seq.source_id + "': snapshot time " + std::to_string(s.t) +
                                          " does not increase");
        previous = s.t;
        const double row[10] = {s.cpu_system_pct, s.cpu_user_pct, s.mem_used,   s.swap_used, s.total_procs,
                                s.max_pid,        s.bytes_sent,   s.bytes_recv, s.pkts_sent, s.pkts_recv};
        seq.values.insert(seq.values.end(), std::begin(row), std::end(row));
        seq.times_ms.push_back(s.t * 1000);
    }
    if (stats && !stats->empty()) standardize(seq, *stats);
    return seq;
}

FeatureSequence truncate_to_horizon(const FeatureSequence& seq, std::int64_t t_secs) {
    require(t_secs >= 1, ErrorKind::precondition, "truncation horizon must be >= 1 s");
    std::size_t keep = 0;
    if (is_process_schema(seq.schema)) {
        const std::int64_t limit = t_secs * 1000;
        while (keep < seq.steps() && seq.times_ms[keep] <= limit) ++keep;
    } else {
        keep = std::min<std::size_t>(seq.steps(), static_cast<std::size_t>(t_secs));
    }
    if (keep == seq.steps()) return seq;
    FeatureSequence out;
    out.schema = seq.schema;
    out.width = seq.width;
    out.label = seq.label;
    out.source_id = seq.source_id;
    out.values.assign(seq.values.begin(), seq.values.begin() + static_cast<std::ptrdiff_t>(keep * seq.width));
    out.times_ms.assign(seq.times_ms.begin(), seq.times_ms.begin() + static_cast<std::ptrdiff_t>(keep));
    return out;
}

NormalizationStats compute_normalization(std::span<const FeatureSequence> sequences) {
    NormalizationStats stats;
    if (sequences.empty()) return stats;
    const std::size_t width = sequences.front().width;
    stats.mean.assign(width, 0.0);
    stats.stddev.assign(width, 0.0);
    std::size_t rows = 0;
    for (const FeatureSequence& s : sequences) {
        require(s.width == width, ErrorKind::shape, "normalization over sequences of mixed width");
        for (std::size_t i = 0; i < s.steps(); ++i) {
            const auto r = s.row(i);
            for (std::size_t c = 0; c < width; ++c) stats.mean[c] += r[c];
        }
        rows += s.steps();
    }
    if (rows == 0) return {};
    for (double& m : stats.mean) m /= static_cast<double>(rows);
    for (const FeatureSequence& s : sequences) {
        for (std::size_t i = 0; i < s.steps(); ++i) {
            const auto r = s.row(i);
            for (std::size_t c = 0; c < width; ++c) {
                const double d = r[c] - stats.mean[c];
                stats.stddev[c] += d * d;
            }
        }
    }
    for (double& v : stats.stddev) v = std::sqrt(v / static_cast<double>(rows));
    return stats;
}

void standardize(FeatureSequence& seq, const NormalizationStats& stats) {
    require(stats.mean.size() == seq.width && stats.stddev.size() == seq.width, ErrorKind::shape,
            "normalization width does not match sequence width");
    for (std::size_t i = 0; i < seq.steps(); ++i) {
        auto r = seq.row(i);
        for (std::size_t c = 0; c < seq.width; ++c) {
            r[c] -= stats.mean[c];
            if (stats.stddev[c] > 0) r[c] /= stats.stddev[c];
        }
    }
}

void destandardize(FeatureSequence& seq, const NormalizationStats& stats) {
    require(stats.mean.size() == seq.width && stats.stddev.size() == seq.width, ErrorKind::shape,
            "normalization width does not match sequence width");
    for (std::size_t i = 0; i < seq.steps(); ++i) {
        auto r = seq.row(i);
        for (std::size_t c = 0; c < seq.width; ++c) {
            if (stats.stddev[c] > 0) r[c] *= stats.stddev[c];
            r[c] += stats.mean[c];
        }
    }
}

} // namespace procsight
