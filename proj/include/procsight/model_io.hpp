#pragma once

#include <string>

#include "procsight/rnn.hpp"

namespace procsight {

/// JSON envelope: format, format_version, cell, schema_id, dims,
/// normalization, named tensors as hex little-endian doubles, stamp and a
/// sha256 checksum over the rest of the document.
std::string model_to_json(const RnnModel& model);

/// Throws Error(corruption) on unparsable or tampered content and
/// Error(version) when format_version differs from kModelFormatVersion.
RnnModel model_from_json(const std::string& text);

void save_model(const RnnModel& model, const std::string& path);
RnnModel load_model(const std::string& path);

} // namespace procsight
