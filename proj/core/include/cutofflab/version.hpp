#pragma once

namespace cutofflab {

// Embedded in output sidecar metadata; bump when any wire format or numeric
// contract changes.
inline constexpr const char* kVersion = "0.1.0";

}  // namespace cutofflab
