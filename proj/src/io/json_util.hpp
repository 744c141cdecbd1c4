#pragma once

// Internal helpers shared by the artifact readers and writers.

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "procsight/stamp.hpp"

namespace procsight::detail {

using nlohmann::json;

/// Parses one JSON document, translating nlohmann errors into ParseError.
json parse_json(std::string_view text);

/// Writes to "<path>.partial" and renames over path, so readers never observe
/// a half-written artifact. The partial file is removed on failure.
void atomic_write(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);
std::vector<std::string> read_lines(const std::string& path);

json stamp_to_json(const ArtifactStamp& stamp);
ArtifactStamp stamp_from_json(const json& j);

/// Required-field accessors that raise Error(schema) naming the field.
const json& field(const json& object, const char* name, std::string_view context);
std::string string_field(const json& object, const char* name, std::string_view context);
std::int64_t int_field(const json& object, const char* name, std::string_view context);

} // namespace procsight::detail
