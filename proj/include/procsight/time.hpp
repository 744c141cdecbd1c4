#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace procsight {

using Millis = std::chrono::milliseconds;
using Timestamp = std::chrono::sys_time<Millis>;

/// Parses "YYYY-MM-DD hh:mm:ss[.fff...]" or the ISO form
/// "YYYY-MM-DDThh:mm:ss[.ffffff][Z]". Fractions beyond milliseconds are
/// truncated. Throws Error(schema) on anything else.
Timestamp parse_timestamp(std::string_view text);

/// Formats as "YYYY-MM-DD hh:mm:ss.fff" (the Sysmon UtcTime layout).
std::string format_timestamp(Timestamp ts);

inline std::int64_t to_epoch_ms(Timestamp ts) { return ts.time_since_epoch().count(); }
inline Timestamp from_epoch_ms(std::int64_t ms) { return Timestamp{Millis{ms}}; }

} // namespace procsight
