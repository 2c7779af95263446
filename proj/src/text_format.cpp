#include "protoeval/text_format.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace protoeval {

namespace {

std::string to_chars_or_throw(double value, std::chars_format fmt, int precision) {
  std::array<char, 64> buffer{};
  auto result = precision < 0
                    ? std::to_chars(buffer.data(), buffer.data() + buffer.size(), value, fmt)
                    : std::to_chars(buffer.data(), buffer.data() + buffer.size(), value, fmt,
                                    precision);
  if (result.ec != std::errc{}) {
    throw std::range_error("number does not fit in format buffer");
  }
  return std::string(buffer.data(), result.ptr);
}

// "-0.000" and friends render as their unsigned form.
std::string strip_negative_zero(std::string text) {
  if (!text.empty() && text.front() == '-' &&
      text.find_first_not_of("0.", 1) == std::string::npos) {
    text.erase(0, 1);
  }
  return text;
}

} // namespace

std::string format_fixed(double value, int decimals) {
  return strip_negative_zero(to_chars_or_throw(value, std::chars_format::fixed, decimals));
}

std::string format_canonical(double value) {
  std::string text = format_fixed(value, 6);
  if (auto dot = text.find('.'); dot != std::string::npos) {
    auto last = text.find_last_not_of('0');
    text.erase(last == dot ? dot : last + 1);
  }
  return strip_negative_zero(text);
}

std::string format_shortest(double value) {
  if (value == 0.0) {
    return "0";
  }
  return to_chars_or_throw(value, std::chars_format::general, -1);
}

std::string format_percent(std::optional<double> ratio, int decimals) {
  if (!ratio) {
    return {};
  }
  return format_fixed(*ratio * 100.0, decimals);
}

std::string format_optional(std::optional<double> value, int decimals) {
  return value ? format_fixed(*value, decimals) : std::string{};
}

std::vector<std::string> split_fields(std::string_view line, char delimiter) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string_view trim(std::string_view text) {
  constexpr std::string_view whitespace = " \t\r\n\f\v";
  auto first = text.find_first_not_of(whitespace);
  if (first == std::string_view::npos) {
    return {};
  }
  auto last = text.find_last_not_of(whitespace);
  return text.substr(first, last - first + 1);
}

std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  if (text.empty()) {
    return std::nullopt;
  }
  if (text.front() == '+') {
    text.remove_prefix(1);
  }
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

std::optional<long long> parse_integer(std::string_view text) {
  text = trim(text);
  if (text.empty()) {
    return std::nullopt;
  }
  if (text.front() == '+') {
    text.remove_prefix(1);
  }
  long long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    return std::nullopt;
  }
  return value;
}

} // namespace protoeval
