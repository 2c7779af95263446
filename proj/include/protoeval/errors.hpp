#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace protoeval {

/// Malformed input: bad syntax, wrong field count, missing required field.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& message, std::optional<std::size_t> line = std::nullopt,
             std::string field = {});

  /// 1-based line of the offending input, when known.
  std::optional<std::size_t> line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

private:
  std::optional<std::size_t> line_;
  std::string field_;
};

/// Well-formed input that breaks a domain invariant.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A quantity whose denominator is empty (positive fraction of no images, etc).
class UndefinedValueError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

} // namespace protoeval
