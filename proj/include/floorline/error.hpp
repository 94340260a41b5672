#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace floorline {

enum class ErrorCode {
  MalformedEncoding,
  HeaderMismatch,
  InvalidPlaneIndex,
  InvariantViolation,
  CoincidentPoints,
  RowOutOfRange,
  PitchOutOfRange,
  EmptyInstance,
  NoRoadsideFeature,
  EstimationFailed,
  KindMismatch,
  ParseError,
  SchemaError,
  NoVisibleDoor,
  NoMatchingImage,
  HttpError,
  IncompleteBundle,
  DegenerateScene,
  NoTruth,
  TooFewRows,
  DegenerateGroups,
  DegeneratePairs,
  IoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedEncoding: return "MalformedEncoding";
    case ErrorCode::HeaderMismatch: return "HeaderMismatch";
    case ErrorCode::InvalidPlaneIndex: return "InvalidPlaneIndex";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::CoincidentPoints: return "CoincidentPoints";
    case ErrorCode::RowOutOfRange: return "RowOutOfRange";
    case ErrorCode::PitchOutOfRange: return "PitchOutOfRange";
    case ErrorCode::EmptyInstance: return "EmptyInstance";
    case ErrorCode::NoRoadsideFeature: return "NoRoadsideFeature";
    case ErrorCode::EstimationFailed: return "EstimationFailed";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::NoVisibleDoor: return "NoVisibleDoor";
    case ErrorCode::NoMatchingImage: return "NoMatchingImage";
    case ErrorCode::HttpError: return "HttpError";
    case ErrorCode::IncompleteBundle: return "IncompleteBundle";
    case ErrorCode::DegenerateScene: return "DegenerateScene";
    case ErrorCode::NoTruth: return "NoTruth";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::DegenerateGroups: return "DegenerateGroups";
    case ErrorCode::DegeneratePairs: return "DegeneratePairs";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI's per-house rows) can report it without string
/// matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// ParseError that remembers which data row (1-based) was rejected.
class ParseError : public Error {
 public:
  ParseError(std::size_t row, const std::string& what)
      : Error(ErrorCode::ParseError, "row " + std::to_string(row) + ": " + what), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

}  // namespace floorline
