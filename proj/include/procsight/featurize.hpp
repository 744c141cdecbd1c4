#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "procsight/ingest.hpp"
#include "procsight/stamp.hpp"

namespace procsight {

enum class SchemaId { event_only_5, complete_31, machine_10 };

enum class ColumnKind { binary_flag, one_hot_member, count, milliseconds, real };

struct FeatureColumn {
    std::string_view name;
    ColumnKind kind;
};

struct FeatureSchema {
    SchemaId id;
    std::span<const FeatureColumn> columns;

    std::size_t width() const noexcept { return columns.size(); }
};

inline constexpr int kSchemaRegistryVersion = 1;

const FeatureSchema& schema_for(SchemaId id);
std::size_t schema_width(SchemaId id);
const char* to_string(SchemaId id) noexcept;
const char* to_string(ColumnKind kind) noexcept;
/// Accepts canonical ids ("complete_31") and short CLI names ("complete").
SchemaId parse_schema_id(std::string_view text);
bool is_process_schema(SchemaId id) noexcept;

/// Versioned JSON document describing all schemas and their column order.
std::string schema_registry_json();

/// Column indices of the Complete schema.
namespace complete_col {
inline constexpr std::size_t hollows_first = 0; // 10 scanner counts
inline constexpr std::size_t same_image_loaded = 10;
inline constexpr std::size_t signature_status = 11;
inline constexpr std::size_t signed_flag = 12;
inline constexpr std::size_t signed_failed = 13;
inline constexpr std::size_t protocol_udp = 14;
inline constexpr std::size_t protocol_tcp = 15;
inline constexpr std::size_t dport_http = 16;
inline constexpr std::size_t dport_https = 17;
inline constexpr std::size_t dport_other = 18;
inline constexpr std::size_t integrity_first = 19; // High, Low, Medium, System
inline constexpr std::size_t event_id_first = 23;  // 1, 3, 5, 12, 13
inline constexpr std::size_t event_type_delete = 28;
inline constexpr std::size_t event_type_set = 29;
inline constexpr std::size_t timestamp = 30;
} // namespace complete_col

/// One sample: an ordered list of fixed-width vectors stored row-major.
/// times_ms holds each row's offset from the sample start, used for
/// truncation independently of whatever the timestamp column contains.
struct FeatureSequence {
    SchemaId schema = SchemaId::event_only_5;
    std::size_t width = 0;
    std::vector<double> values;
    std::vector<std::int64_t> times_ms;
    Label label = Label::unknown;
    std::string source_id;

    std::size_t steps() const noexcept { return times_ms.size(); }
    bool empty() const noexcept { return times_ms.empty(); }
    std::span<const double> row(std::size_t i) const { return {values.data() + i * width, width}; }
    std::span<double> row(std::size_t i) { return {values.data() + i * width, width}; }

    bool operator==(const FeatureSequence&) const = default;
};

struct MachineSnapshot {
    std::int64_t t = 0; // seconds since window start
    double cpu_system_pct = 0;
    double cpu_user_pct = 0;
    double mem_used = 0;
    double swap_used = 0;
    double total_procs = 0;
    double max_pid = 0;
    double bytes_sent = 0;
    double bytes_recv = 0;
    double pkts_sent = 0;
    double pkts_recv = 0;

    bool operator==(const MachineSnapshot&) const = default;
};

struct MachineSeries {
    std::string machine;
    std::string window_id;
    std::vector<MachineSnapshot> snapshots;
    Label label = Label::unknown;
};

struct NormalizationStats {
    std::vector<double> mean;
    std::vector<double> stddev; // population standard deviation; 0 marks a constant column

    bool empty() const noexcept { return mean.empty(); }
    bool operator==(const NormalizationStats&) const = default;
};

struct EncodeOptions {
    /// Divide the relative-timestamp column by the 120 000 ms window.
    bool scale_timestamps = false;
};

inline constexpr double kTimestampScale = 120'000.0;

struct EncodeDiagnostics {
    std::size_t unknown_integrity = 0;
    std::size_t unknown_port_names = 0;
};

/// Milliseconds from origin to event. Throws Error(ordering) if the event
/// precedes the origin.
std::int64_t relative_timestamp(const SysmonEvent& event, Timestamp origin);

FeatureSequence encode_event_only(const ProcessActivity& activity);
FeatureSequence encode_complete(const ProcessActivity& activity, const EncodeOptions& options = {},
                                EncodeDiagnostics* diagnostics = nullptr);
FeatureSequence encode_machine(const MachineSeries& series, const NormalizationStats* stats = nullptr);

/// Keeps rows visible t seconds after start: process schemas by timestamp
/// (<= t*1000 ms), the machine schema by count (first t rows).
FeatureSequence truncate_to_horizon(const FeatureSequence& seq, std::int64_t t_secs);

NormalizationStats compute_normalization(std::span<const FeatureSequence> sequences);
void standardize(FeatureSequence& seq, const NormalizationStats& stats);
void destandardize(FeatureSequence& seq, const NormalizationStats& stats);

// ---------------------------------------------------------------------------
// Matrix files: header line {schema_id, width, count, columns, stamp}, then
// one JSON record per sequence {source_id, label, times_ms, rows}.

inline constexpr int kMatrixFormatVersion = 1;

struct MatrixFile {
    SchemaId schema = SchemaId::event_only_5;
    std::vector<FeatureSequence> sequences;
    ArtifactStamp stamp;
};

void write_matrix_file(const std::string& path, const MatrixFile& matrix);
MatrixFile read_matrix_file(const std::string& path);

/// Machine-series CSV: header row of snapshot column names, one row per second.
void write_machine_csv(const std::string& path, const MachineSeries& series);
MachineSeries read_machine_csv(const std::string& path);

} // namespace procsight
