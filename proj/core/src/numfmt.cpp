#include "gravekit/numfmt.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace gravekit {

std::string format_shortest(double v) {
    if (v == 0.0) v = 0.0;  // drop the sign of negative zero
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

std::string format_rounded(double v) { return format_shortest(std::round(v * 1e4) / 1e4); }

std::optional<double> parse_double(std::string_view text) {
    double value = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

}  // namespace gravekit
