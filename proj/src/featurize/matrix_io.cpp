#include <cstdio>
#include <sstream>

#include "../io/json_util.hpp"
#include "procsight/error.hpp"
#include "procsight/featurize.hpp"

namespace procsight {

using detail::json;

void write_matrix_file(const std::string& path, const MatrixFile& matrix) {
    const FeatureSchema& schema = schema_for(matrix.schema);
    json columns = json::array();
    for (const FeatureColumn& c : schema.columns) columns.push_back(std::string(c.name));
    std::string out = json{{"format", "procsight.matrix"},
                           {"format_version", kMatrixFormatVersion},
                           {"schema_id", to_string(matrix.schema)},
                           {"width", schema.width()},
                           {"count", matrix.sequences.size()},
                           {"columns", std::move(columns)},
                           {"stamp", detail::stamp_to_json(matrix.stamp)}}
                          .dump();
    out += '\n';
    for (const FeatureSequence& s : matrix.sequences) {
        require(s.schema == matrix.schema && s.width == schema.width(), ErrorKind::schema,
                "sequence '" + s.source_id + "' does not match matrix schema " + to_string(matrix.schema));
        json rows = json::array();
        for (std::size_t i = 0; i < s.steps(); ++i) {
            const auto r = s.row(i);
            rows.push_back(std::vector<double>(r.begin(), r.end()));
        }
        out += json{{"source_id", s.source_id},
                    {"label", to_string(s.label)},
                    {"times_ms", s.times_ms},
                    {"rows", std::move(rows)}}
                   .dump();
        out += '\n';
    }
    detail::atomic_write(path, out);
}

MatrixFile read_matrix_file(const std::string& path) {
    const auto lines = detail::read_lines(path);
    if (lines.empty()) fail(ErrorKind::corruption, "'" + path + "': empty matrix file");
    const json header = detail::parse_json(lines.front());
    if (header.value("format", std::string{}) != "procsight.matrix")
        fail(ErrorKind::schema, "'" + path + "' is not a matrix file");
    const int version = header.value("format_version", 0);
    if (version != kMatrixFormatVersion)
        fail(ErrorKind::version, "matrix format version " + std::to_string(version) + ", expected " +
                                     std::to_string(kMatrixFormatVersion));

    MatrixFile m;
    m.schema = parse_schema_id(detail::string_field(header, "schema_id", "matrix header"));
    m.stamp = detail::stamp_from_json(header.value("stamp", json::object()));
    const std::size_t width = schema_width(m.schema);
    if (static_cast<std::size_t>(detail::int_field(header, "width", "matrix header")) != width)
        fail(ErrorKind::schema, "'" + path + "': width does not match schema " + to_string(m.schema));
    const auto count = static_cast<std::size_t>(detail::int_field(header, "count", "matrix header"));

    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const json j = detail::parse_json(lines[i]);
        constexpr std::string_view ctx = "matrix record";
        FeatureSequence s;
        s.schema = m.schema;
        s.width = width;
        s.source_id = detail::string_field(j, "source_id", ctx);
        s.label = parse_label(detail::string_field(j, "label", ctx));
        s.times_ms = detail::field(j, "times_ms", ctx).get<std::vector<std::int64_t>>();
        const json& rows = detail::field(j, "rows", ctx);
        if (!rows.is_array() || rows.size() != s.times_ms.size())
            fail(ErrorKind::schema, "'" + path + "': record '" + s.source_id + "' has mismatched rows/times_ms");
        s.values.reserve(rows.size() * width);
        for (const json& r : rows) {
            if (!r.is_array() || r.size() != width)
                fail(ErrorKind::schema, "'" + path + "': record '" + s.source_id + "' has a row of wrong width");
            for (const json& v : r) s.values.push_back(v.get<double>());
        }
        m.sequences.push_back(std::move(s));
    }
    if (m.sequences.size() != count)
        fail(ErrorKind::corruption, "'" + path + "': header declares " + std::to_string(count) + " records, found " +
                                        std::to_string(m.sequences.size()));
    return m;
}

namespace {

constexpr const char* kMachineCsvHeader =
    "t,cpu_system_pct,cpu_user_pct,mem_used,swap_used,total_procs,max_pid,bytes_sent,bytes_recv,pkts_sent,pkts_recv";

} // namespace

void write_machine_csv(const std::string& path, const MachineSeries& series) {
    std::string out = "# machine=" + series.machine + " window=" + series.window_id +
                      " label=" + to_string(series.label) + "\n";
    out += kMachineCsvHeader;
    out += '\n';
    char buf[512];
    for (const MachineSnapshot& s : series.snapshots) {
        std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      static_cast<long long>(s.t), s.cpu_system_pct, s.cpu_user_pct, s.mem_used, s.swap_used,
                      s.total_procs, s.max_pid, s.bytes_sent, s.bytes_recv, s.pkts_sent, s.pkts_recv);
        out += buf;
    }
    detail::atomic_write(path, out);
}

MachineSeries read_machine_csv(const std::string& path) {
    MachineSeries series;
    bool header_seen = false;
    std::size_t line_no = 0;
    for (const std::string& line : detail::read_lines(path)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream meta(line.substr(1));
            std::string kv;
            while (meta >> kv) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
                if (key == "machine") series.machine = value;
                else if (key == "window") series.window_id = value;
                else if (key == "label") series.label = parse_label(value);
            }
            continue;
        }
        if (!header_seen) {
            if (line != kMachineCsvHeader) fail(ErrorKind::schema, "'" + path + "': unexpected machine CSV header");
            header_seen = true;
            continue;
        }
        MachineSnapshot s;
        long long t = 0;
        const int n = std::sscanf(line.c_str(), "%lld,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &t, &s.cpu_system_pct,
                                  &s.cpu_user_pct, &s.mem_used, &s.swap_used, &s.total_procs, &s.max_pid,
                                  &s.bytes_sent, &s.bytes_recv, &s.pkts_sent, &s.pkts_recv);
        if (n != 11) fail(ErrorKind::schema, path + ":" + std::to_string(line_no) + ": malformed snapshot row");
        s.t = t;
        series.snapshots.push_back(s);
    }
    if (!header_seen) fail(ErrorKind::schema, "'" + path + "': missing machine CSV header");
    return series;
}

} // namespace procsight
