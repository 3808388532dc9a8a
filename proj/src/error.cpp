#include "shipems/error.hpp"

namespace shipems {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::InfeasibleProblem: return "InfeasibleProblem";
    case ErrorKind::InvalidSamplingTime: return "InvalidSamplingTime";
    case ErrorKind::InvalidHorizon: return "InvalidHorizon";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InfeasibleEnvelope: return "InfeasibleEnvelope";
    case ErrorKind::ZeroAggregateLimit: return "ZeroAggregateLimit";
    case ErrorKind::DuplicateSender: return "DuplicateSender";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::EmptyTrace: return "EmptyTrace";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::UnknownSession: return "UnknownSession";
    case ErrorKind::Busy: return "Busy";
  }
  return "Unknown";
}

ScenarioError::ScenarioError(ErrorKind kind, std::string path, int line, const std::string& what)
    : Error(kind, std::string(to_string(kind)) + " at " + (path.empty() ? "/" : path) +
                      (line > 0 ? " (line " + std::to_string(line) + ")" : "") + ": " + what),
      path_(std::move(path)),
      line_(line) {}

}  // namespace shipems
