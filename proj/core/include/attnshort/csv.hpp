#pragma once

#include <charconv>
#include <string>

namespace attnshort {

/// Shortest round-trip decimal form; keeps CSV output byte-stable across
/// runs without locale or iostream-precision surprises.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

}  // namespace attnshort
