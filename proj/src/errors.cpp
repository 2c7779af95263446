#include "protoeval/errors.hpp"

namespace protoeval {

namespace {

std::string with_context(const std::string& message, std::optional<std::size_t> line,
                         const std::string& field) {
  std::string text;
  if (line) {
    text += "line " + std::to_string(*line) + ": ";
  }
  if (!field.empty()) {
    text += field + ": ";
  }
  return text + message;
}

} // namespace

ParseError::ParseError(const std::string& message, std::optional<std::size_t> line,
                       std::string field)
    : std::runtime_error(with_context(message, line, field)), line_(line),
      field_(std::move(field)) {}

} // namespace protoeval
