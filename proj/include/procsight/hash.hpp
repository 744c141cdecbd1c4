#pragma once

#include <string>
#include <string_view>

namespace procsight {

std::string sha256_hex(std::string_view data);

/// Git blob id: SHA-1 over "blob <size>\0" followed by the content.
std::string git_blob_hash(std::string_view content);

} // namespace procsight
