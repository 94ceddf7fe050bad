#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <system_error>

#include <mtalign/error.hpp>

namespace mtalign {

/// Shortest decimal text that parses back to exactly `v`.
[[nodiscard]] inline std::string format_real(double v)
{
    if (std::isinf(v))
        return v < 0 ? "-inf" : "inf";
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return {buf.data(), res.ptr};
}

[[nodiscard]] inline double parse_real(std::string_view text)
{
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t'))
        text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
        text.remove_suffix(1);
    if (!text.empty() && text.front() == '+')
        text.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw FormatError("not a number: '" + std::string(text) + "'");
    return v;
}

}  // namespace mtalign
