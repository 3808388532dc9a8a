#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace shipems {

enum class ErrorKind {
  SingularMatrix,
  InfeasibleProblem,
  InvalidSamplingTime,
  InvalidHorizon,
  DimensionMismatch,
  InfeasibleEnvelope,
  ZeroAggregateLimit,
  DuplicateSender,
  ParseError,
  SchemaError,
  ValidationError,
  EmptyTrace,
  IoError,
  UnknownSession,
  Busy,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Base exception for every failure raised by the library. The kind is the
/// stable, machine-checkable part; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Scenario document errors carry the JSON pointer and 1-based source line
/// (0 when the line cannot be determined).
class ScenarioError : public Error {
 public:
  ScenarioError(ErrorKind kind, std::string path, int line, const std::string& what);

  const std::string& path() const noexcept { return path_; }
  int line() const noexcept { return line_; }

 private:
  std::string path_;
  int line_;
};

}  // namespace shipems
