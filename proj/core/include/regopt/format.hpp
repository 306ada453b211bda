#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace regopt {

// Shortest round-trip decimal form, locale independent. All CSV/SVG output
// goes through this so emitted artifacts are byte-deterministic.
inline std::string format_double(double value) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    (void)ec;
    return std::string(buf, ptr);
}

inline std::string format_u64(std::uint64_t value) {
    char buf[24];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    (void)ec;
    return std::string(buf, ptr);
}

} // namespace regopt
