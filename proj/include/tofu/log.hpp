#pragma once

#include <cstdint>

namespace tofu {

// Line-oriented logging to stderr with ISO-8601 timestamps.
void log_info(const char* fmt, ...);
void log_warn(const char* fmt, ...);

// Running count of warnings emitted; tests use it to observe recorded
// warnings (degenerate normals, rejected optimizer steps, depth clamps).
int64_t warning_count();
void reset_warning_count();

}  // namespace tofu
