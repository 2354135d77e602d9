#pragma once

namespace covmatch {

inline constexpr const char* kToolName = "covmatch";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

}  // namespace covmatch
