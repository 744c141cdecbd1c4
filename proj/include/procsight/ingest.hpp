#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "procsight/stamp.hpp"
#include "procsight/time.hpp"

namespace procsight {

/// Sysmon event IDs collected by the sensor configuration.
inline constexpr int kCollectedEventIds[] = {1, 2, 3, 5, 7, 8, 11, 12, 13, 14, 22};
/// Subset used for analysis: process creation, network connection,
/// process termination and the two registry events.
inline constexpr int kAnalysisEventIds[] = {1, 3, 5, 12, 13};

bool is_collected_event(int event_id) noexcept;
bool is_analysis_event(int event_id) noexcept;

struct SysmonEvent {
    int event_id = 0;
    std::string process_guid;
    std::string machine;
    Timestamp utc_time{};
    std::optional<std::string> event_type; // registry events only
    std::map<std::string, std::string> attributes;

    /// attributes["ProcessId"] as an integer, when present and numeric.
    std::optional<std::int64_t> process_id() const;

    bool operator==(const SysmonEvent&) const = default;
};

struct HollowsReport {
    std::int64_t pid = 0;
    std::string machine;
    Timestamp scan_time{};
    std::int64_t is_managed = 0;
    std::int64_t replaced = 0;
    std::int64_t hdr_modified = 0;
    std::int64_t total_modified = 0;
    std::int64_t patched = 0;
    std::int64_t iat_hooked = 0;
    std::int64_t implanted_shc = 0;
    std::int64_t unreachable_file = 0;
    std::int64_t other = 0;
    std::int64_t implanted_pe = 0;

    /// The ten scanner counts in feature-column order.
    std::array<std::int64_t, 10> counts() const {
        return {is_managed, replaced, hdr_modified, total_modified, patched,
                iat_hooked, implanted_shc, unreachable_file, other, implanted_pe};
    }

    bool operator==(const HollowsReport&) const = default;
};

enum class Label { benign, malicious, unknown };

const char* to_string(Label label) noexcept;
Label parse_label(std::string_view text);

struct ProcessActivity {
    std::string process_guid;
    std::string machine;
    Timestamp origin_time{};
    std::vector<SysmonEvent> events;
    std::optional<HollowsReport> hollows;
    Label label = Label::unknown;
    /// True when the first event is not a process-creation record.
    bool orphan = false;

    bool operator==(const ProcessActivity&) const = default;
};

// ---------------------------------------------------------------------------
// Operations

/// Parses one line of evtx-dump newline-JSON. Accepts the nested
/// {"Event":{"System":..,"EventData":..}} layout as well as a flat object.
/// Throws ParseError (with byte offset) on malformed JSON, Error(schema) on
/// missing required fields and Error(unsupported) for event IDs outside the
/// collected set.
SysmonEvent parse_event_line(std::string_view line);

HollowsReport parse_hollows_line(std::string_view line);

/// Keeps events whose ID is in the analysis set, preserving order.
std::vector<SysmonEvent> filter_events(const std::vector<SysmonEvent>& events);

/// True for guids whose timestamp-derived middle groups (second and third of
/// five) are all zeros, the signature of the unpatched-Windows Sysmon bug.
bool is_degenerate_guid(std::string_view guid) noexcept;

struct GuidRepair {
    std::vector<SysmonEvent> events;
    std::size_t rewritten = 0;
};

/// Rewrites degenerate guids into synthetic ones keyed by machine, process id
/// and the 120-second bucket of the owning creation event. Output order equals
/// input order.
GuidRepair resolve_guid_collisions(const std::vector<SysmonEvent>& events);

inline constexpr Millis kCollisionBucket{120'000};

/// Groups events by process_guid. Activities come out ordered by
/// (origin_time, guid); events within an activity by (utc_time, input order).
std::vector<ProcessActivity> correlate(const std::vector<SysmonEvent>& events);

struct HollowsJoin {
    std::vector<ProcessActivity> activities;
    std::vector<HollowsReport> unmatched;
};

/// Attaches each report to the activity on the same machine whose creation
/// event carries the report's pid and whose origin lies within `window`
/// before the scan. One report per activity, closest scan_time wins.
HollowsJoin attach_hollows(std::vector<ProcessActivity> activities, const std::vector<HollowsReport>& reports,
                           Millis window);

// ---------------------------------------------------------------------------
// File-level helpers

struct EventReadStats {
    std::size_t lines = 0;
    std::size_t parsed = 0;
    std::size_t unsupported = 0; // event IDs outside the collected set
};

/// Parses a newline-JSON event file. Blank lines are skipped; events with IDs
/// outside the collected set are tallied and skipped; any other error is
/// rethrown with the file name and line number prefixed.
std::vector<SysmonEvent> read_event_file(const std::string& path, EventReadStats* stats = nullptr);
std::vector<HollowsReport> read_hollows_file(const std::string& path);

std::string event_to_json_line(const SysmonEvent& event);
std::string hollows_to_json_line(const HollowsReport& report);

inline constexpr int kActivityStoreVersion = 1;

/// Activity store: header line {"format":"procsight.activities",...}, then
/// one ProcessActivity per line.
void write_activity_store(const std::string& path, const std::vector<ProcessActivity>& activities,
                          const ArtifactStamp& stamp = {});
std::vector<ProcessActivity> read_activity_store(const std::string& path);

} // namespace procsight
