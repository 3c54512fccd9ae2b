#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nestkrig {

enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  NotFactorizable,
  FileNotFound,
  EmptyFile,
  ParseError,
  InvalidGroupCount,
  InvalidTree,
  InvalidHeight,
  NonPositiveVariance,
  EmptyGroupAfterDeletion,
  NonFiniteCriterion,
  CapExceeded,
  ConfigError,
  IoError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotFactorizable: return "NotFactorizable";
    case ErrorKind::FileNotFound: return "FileNotFound";
    case ErrorKind::EmptyFile: return "EmptyFile";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::InvalidGroupCount: return "InvalidGroupCount";
    case ErrorKind::InvalidTree: return "InvalidTree";
    case ErrorKind::InvalidHeight: return "InvalidHeight";
    case ErrorKind::NonPositiveVariance: return "NonPositiveVariance";
    case ErrorKind::EmptyGroupAfterDeletion: return "EmptyGroupAfterDeletion";
    case ErrorKind::NonFiniteCriterion: return "NonFiniteCriterion";
    case ErrorKind::CapExceeded: return "CapExceeded";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it to an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Parse failures remember where they happened (1-based line and column).
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& message)
      : Error(ErrorKind::ParseError, "line " + std::to_string(line) + ", column " +
                                         std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::DimensionMismatch, what);
}

}  // namespace nestkrig
