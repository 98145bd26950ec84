#pragma once

#include <chrono>
#include <string>

namespace hsprobe {

// RFC 3339 UTC with millisecond precision, e.g. "2026-08-11T04:10:05.123Z".
std::string to_rfc3339(std::chrono::system_clock::time_point tp);

inline double to_ms(std::chrono::steady_clock::duration d) {
    return std::chrono::duration<double, std::milli>(d).count();
}

}  // namespace hsprobe
