#include "json_util.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "procsight/error.hpp"

namespace procsight::detail {

json parse_json(std::string_view text) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON at byte ") + std::to_string(e.byte) + ": " + e.what(),
                         e.byte);
    }
}

void atomic_write(const std::string& path, const std::string& content) {
    const std::string partial = path + ".partial";
    {
        std::ofstream out(partial, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::io, "cannot open '" + partial + "' for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            out.close();
            std::filesystem::remove(partial);
            fail(ErrorKind::io, "write failed for '" + path + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(partial, path, ec);
    if (ec) {
        std::filesystem::remove(partial);
        fail(ErrorKind::io, "cannot rename '" + partial + "': " + ec.message());
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

json stamp_to_json(const ArtifactStamp& stamp) {
    return json{{"config_hash", stamp.config_hash}, {"seed", stamp.seed}, {"format_version", stamp.format_version}};
}

ArtifactStamp stamp_from_json(const json& j) {
    ArtifactStamp stamp;
    if (!j.is_object()) return stamp;
    stamp.config_hash = j.value("config_hash", std::string{});
    stamp.seed = j.value("seed", std::uint64_t{0});
    stamp.format_version = j.value("format_version", 1);
    return stamp;
}

const json& field(const json& object, const char* name, std::string_view context) {
    if (!object.is_object() || !object.contains(name))
        fail(ErrorKind::schema, std::string(context) + ": missing field '" + name + "'");
    return object.at(name);
}

std::string string_field(const json& object, const char* name, std::string_view context) {
    const json& v = field(object, name, context);
    if (!v.is_string()) fail(ErrorKind::schema, std::string(context) + ": field '" + name + "' must be a string");
    return v.get<std::string>();
}

std::int64_t int_field(const json& object, const char* name, std::string_view context) {
    const json& v = field(object, name, context);
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d == static_cast<double>(static_cast<std::int64_t>(d))) return static_cast<std::int64_t>(d);
    }
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        try {
            std::size_t used = 0;
            const long long parsed = std::stoll(s, &used, 0);
            if (used == s.size()) return parsed;
        } catch (const std::exception&) {
        }
    }
    fail(ErrorKind::schema, std::string(context) + ": field '" + name + "' must be an integer");
}

} // namespace procsight::detail
