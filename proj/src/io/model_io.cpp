#include "procsight/model_io.hpp"

#include <bit>
#include <cstring>

#include "json_util.hpp"
#include "procsight/error.hpp"
#include "procsight/hash.hpp"

namespace procsight {

using detail::json;

namespace {

constexpr char kFormat[] = "procsight.model";

std::string encode_doubles(std::span<const double> values) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(values.size() * 16);
    for (double v : values) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        for (int byte = 0; byte < 8; ++byte, bits >>= 8) {
            const auto b = static_cast<unsigned>(bits & 0xFF);
            out += kDigits[b >> 4];
            out += kDigits[b & 0xF];
        }
    }
    return out;
}

int nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

std::vector<double> decode_doubles(const std::string& hex, std::size_t expected, const std::string& what) {
    if (hex.size() != expected * 16)
        fail(ErrorKind::corruption, "tensor '" + what + "' holds " + std::to_string(hex.size() / 16) +
                                        " values, expected " + std::to_string(expected));
    std::vector<double> out(expected);
    for (std::size_t i = 0; i < expected; ++i) {
        std::uint64_t bits = 0;
        for (int byte = 7; byte >= 0; --byte) {
            const int hi = nibble(hex[i * 16 + 2 * static_cast<std::size_t>(byte)]);
            const int lo = nibble(hex[i * 16 + 2 * static_cast<std::size_t>(byte) + 1]);
            if (hi < 0 || lo < 0) fail(ErrorKind::corruption, "tensor '" + what + "' is not hex");
            bits = (bits << 8) | static_cast<std::uint64_t>(hi << 4 | lo);
        }
        out[i] = std::bit_cast<double>(bits);
    }
    return out;
}

std::string checksum_of(const json& body) { return sha256_hex(body.dump()); }

} // namespace

std::string model_to_json(const RnnModel& model) {
    validate_model(model);
    const RnnParams& p = model.params;
    json tensors = json::array();
    for (const auto& t : p.tensors())
        tensors.push_back({{"name", std::string(t.name)}, {"rows", t.rows}, {"cols", t.cols}, {"data", encode_doubles(t.data)}});
    json body{{"format", kFormat},
              {"format_version", model.format_version},
              {"cell", to_string(p.cell())},
              {"schema_id", to_string(model.schema)},
              {"dims", {{"input", p.input_width()}, {"hidden", p.hidden_width()}, {"gates", p.gates()}}},
              {"normalization",
               {{"mean", encode_doubles(model.normalization.mean)},
                {"stddev", encode_doubles(model.normalization.stddev)},
                {"width", model.normalization.mean.size()}}},
              {"tensors", tensors},
              {"stamp", detail::stamp_to_json(model.stamp)}};
    body["checksum"] = checksum_of(body);
    return body.dump(1) + "\n";
}

RnnModel model_from_json(const std::string& text) {
    json j;
    try {
        j = detail::parse_json(text);
    } catch (const ParseError& e) {
        fail(ErrorKind::corruption, std::string("model file is not valid JSON (truncated?): ") + e.what());
    }
    if (!j.is_object() || j.value("format", std::string{}) != kFormat)
        fail(ErrorKind::corruption, "not a procsight model file");
    if (!j.contains("format_version") || !j.at("format_version").is_number_integer())
        fail(ErrorKind::corruption, "model file lacks format_version");
    const auto version = j.at("format_version").get<std::int64_t>();
    if (version != kModelFormatVersion)
        fail(ErrorKind::version, "model format_version " + std::to_string(version) + " unsupported (this build reads " +
                                     std::to_string(kModelFormatVersion) + ")");
    if (!j.contains("checksum") || !j.at("checksum").is_string())
        fail(ErrorKind::corruption, "model file lacks checksum");
    const std::string stored = j.at("checksum").get<std::string>();
    json body = j;
    body.erase("checksum");
    if (checksum_of(body) != stored) fail(ErrorKind::corruption, "model checksum mismatch");

    try {
        const CellKind cell = parse_cell_kind(body.at("cell").get<std::string>());
        const SchemaId schema = parse_schema_id(body.at("schema_id").get<std::string>());
        const auto& dims = body.at("dims");
        const auto input = dims.at("input").get<std::size_t>();
        const auto hidden = dims.at("hidden").get<std::size_t>();
        if (input != schema_width(schema))
            fail(ErrorKind::corruption, "model dims.input does not match schema " + std::string(to_string(schema)));
        if (hidden == 0 || hidden > 1'000'000) fail(ErrorKind::corruption, "model hidden width out of range");

        RnnModel model = make_model(cell, schema, hidden);
        model.format_version = static_cast<int>(version);
        model.stamp = detail::stamp_from_json(body.value("stamp", json::object()));

        const auto& norm = body.at("normalization");
        const auto width = norm.at("width").get<std::size_t>();
        model.normalization.mean = decode_doubles(norm.at("mean").get<std::string>(), width, "normalization.mean");
        model.normalization.stddev = decode_doubles(norm.at("stddev").get<std::string>(), width, "normalization.stddev");

        RnnParams& p = model.params;
        const auto& tensors = body.at("tensors");
        const auto expected = p.tensors();
        if (tensors.size() != expected.size()) fail(ErrorKind::corruption, "model tensor count mismatch");
        std::size_t offset = 0;
        for (std::size_t i = 0; i < expected.size(); ++i) {
            const auto& t = tensors.at(i);
            const std::string name = t.at("name").get<std::string>();
            if (name != expected[i].name) fail(ErrorKind::corruption, "unexpected tensor '" + name + "'");
            const std::size_t n = expected[i].data.size();
            const auto values = decode_doubles(t.at("data").get<std::string>(), n, name);
            std::memcpy(p.all().data() + offset, values.data(), n * sizeof(double));
            offset += n;
        }
        validate_model(model);
        return model;
    } catch (const json::exception& e) {
        fail(ErrorKind::corruption, std::string("model file is malformed: ") + e.what());
    }
}

void save_model(const RnnModel& model, const std::string& path) { detail::atomic_write(path, model_to_json(model)); }

RnnModel load_model(const std::string& path) { return model_from_json(detail::read_file(path)); }

} // namespace procsight
