#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace cadc {

/// Failure categories raised across the toolkit.
enum class Errc {
  MissingColumn,
  MalformedRow,
  EmptyLog,
  SchemaError,
  EmptySeries,
  LengthMismatch,
  NonPositiveTau,
  InvalidConfig,
  AllZeroScales,
  IndexOutOfRange,
  DimensionMismatch,
  SingularCovariance,
  PolicyCollapse,
  Io,
};

const char* to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Parse failure with the location of the offending input. `row` is the
/// 1-based line number for text formats; `path` is a JSON pointer.
class ParseError : public Error {
 public:
  ParseError(Errc code, const std::string& message, std::optional<std::size_t> row = {},
             std::string path = {})
      : Error(code, message), row_(row), path_(std::move(path)) {}

  std::optional<std::size_t> row() const noexcept { return row_; }
  const std::string& path() const noexcept { return path_; }

 private:
  std::optional<std::size_t> row_;
  std::string path_;
};

}  // namespace cadc
