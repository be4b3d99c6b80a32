#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace gravekit {

/// Shortest decimal text that parses back to exactly `v`.
std::string format_shortest(double v);

/// Rounds to 4 decimals, then prints the shortest text of the rounded value.
/// Parsing and reformatting the output is a fixed point.
std::string format_rounded(double v);

/// Strict decimal parse of the whole string; nullopt on any trailing junk.
std::optional<double> parse_double(std::string_view text);

}  // namespace gravekit
