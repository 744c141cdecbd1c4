#pragma once

#include <cstdint>
#include <string>

namespace procsight {

/// Provenance embedded in every emitted artifact.
struct ArtifactStamp {
    std::string config_hash; // git-style blob hash of the canonical config, empty when run ad hoc
    std::uint64_t seed = 0;
    int format_version = 1;

    bool operator==(const ArtifactStamp&) const = default;
};

} // namespace procsight
