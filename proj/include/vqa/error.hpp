#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vqa {

// Error tokens are part of the wire contract: the API reports them verbatim
// in the `code` field and the CLI prints them on stderr.
enum class ErrorCode {
  // domain-model
  LevelCountOutOfRange,
  LabelArityMismatch,
  InvalidLabel,
  InvalidScale,
  InvalidExperiment,
  InvalidVideo,
  ValueOutOfRange,
  ValueOffGrid,
  TimeOutOfRange,
  // ingestion
  UnknownExperiment,
  UnknownSubject,
  UnknownSession,
  SessionAlreadyOpen,
  SubjectAlreadyAssessed,
  SessionNotOpen,
  NonMonotonicTime,
  IncompleteViewing,
  EmptyTrace,
  MissingOriginSample,
  // aggregation
  InvalidGrid,
  NoSubjects,
  NoTraces,
  // persistence
  NotFound,
  ReferentialIntegrity,
  DuplicateId,
  SchemaError,
  IntegrityError,
  StoreUnavailable,
  // api / cli
  BadRequest,
  BindFailure,
  InvalidProfile,
  TransportError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::LevelCountOutOfRange: return "LevelCountOutOfRange";
    case ErrorCode::LabelArityMismatch: return "LabelArityMismatch";
    case ErrorCode::InvalidLabel: return "InvalidLabel";
    case ErrorCode::InvalidScale: return "InvalidScale";
    case ErrorCode::InvalidExperiment: return "InvalidExperiment";
    case ErrorCode::InvalidVideo: return "InvalidVideo";
    case ErrorCode::ValueOutOfRange: return "ValueOutOfRange";
    case ErrorCode::ValueOffGrid: return "ValueOffGrid";
    case ErrorCode::TimeOutOfRange: return "TimeOutOfRange";
    case ErrorCode::UnknownExperiment: return "UnknownExperiment";
    case ErrorCode::UnknownSubject: return "UnknownSubject";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::SessionAlreadyOpen: return "SessionAlreadyOpen";
    case ErrorCode::SubjectAlreadyAssessed: return "SubjectAlreadyAssessed";
    case ErrorCode::SessionNotOpen: return "SessionNotOpen";
    case ErrorCode::NonMonotonicTime: return "NonMonotonicTime";
    case ErrorCode::IncompleteViewing: return "IncompleteViewing";
    case ErrorCode::EmptyTrace: return "EmptyTrace";
    case ErrorCode::MissingOriginSample: return "MissingOriginSample";
    case ErrorCode::InvalidGrid: return "InvalidGrid";
    case ErrorCode::NoSubjects: return "NoSubjects";
    case ErrorCode::NoTraces: return "NoTraces";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::ReferentialIntegrity: return "ReferentialIntegrity";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::IntegrityError: return "IntegrityError";
    case ErrorCode::StoreUnavailable: return "StoreUnavailable";
    case ErrorCode::BadRequest: return "BadRequest";
    case ErrorCode::BindFailure: return "BindFailure";
    case ErrorCode::InvalidProfile: return "InvalidProfile";
    case ErrorCode::TransportError: return "TransportError";
  }
  return "Unknown";
}

/// HTTP status reported for an error code. Each code maps to exactly one
/// status in {400, 404, 409, 422}; service-level failures that never cross
/// the wire (BindFailure, TransportError) fall back to 400.
constexpr int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadRequest:
    case ErrorCode::SchemaError:
    case ErrorCode::InvalidProfile:
    case ErrorCode::BindFailure:
    case ErrorCode::TransportError:
      return 400;
    case ErrorCode::UnknownExperiment:
    case ErrorCode::UnknownSubject:
    case ErrorCode::UnknownSession:
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::SessionAlreadyOpen:
    case ErrorCode::SubjectAlreadyAssessed:
    case ErrorCode::SessionNotOpen:
    case ErrorCode::NonMonotonicTime:
    case ErrorCode::ReferentialIntegrity:
    case ErrorCode::DuplicateId:
    case ErrorCode::StoreUnavailable:
      return 409;
    default:
      return 422;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace vqa
