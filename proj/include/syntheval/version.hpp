#pragma once

namespace syntheval {

inline constexpr const char* kToolName = "syntheval";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kReportSchemaVersion = 1;

}  // namespace syntheval
