#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace protoeval {

// Fixed-point rendering with exactly `decimals` digits, e.g. 0.9473 -> "0.947".
std::string format_fixed(double value, int decimals);

// Up to six fractional digits with trailing zeros (and a bare '.') trimmed.
std::string format_canonical(double value);

// Shortest text that parses back to the same double.
std::string format_shortest(double value);

// Ratio rendered as a percentage with `decimals` digits; empty when undefined.
std::string format_percent(std::optional<double> ratio, int decimals);

// Empty string for an undefined value.
std::string format_optional(std::optional<double> value, int decimals);

std::vector<std::string> split_fields(std::string_view line, char delimiter);
std::string_view trim(std::string_view text);

// Whole-string strict number parsing; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_integer(std::string_view text);

} // namespace protoeval
