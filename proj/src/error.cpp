#include "pentrace/error.hpp"

namespace pentrace {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::NonMonotonicTime: return "NonMonotonicTime";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::NegativeForce: return "NegativeForce";
    case ErrorCode::EmptyWriting: return "EmptyWriting";
    case ErrorCode::DegenerateTilt: return "DegenerateTilt";
    case ErrorCode::TooShortForTremor: return "TooShortForTremor";
    case ErrorCode::SiftDiverged: return "SiftDiverged";
    case ErrorCode::AllZeroSpectra: return "AllZeroSpectra";
    case ErrorCode::TooShortForRqa: return "TooShortForRqa";
    case ErrorCode::MissingTask: return "MissingTask";
    case ErrorCode::DuplicateSubject: return "DuplicateSubject";
    case ErrorCode::UnknownGroup: return "UnknownGroup";
    case ErrorCode::InsufficientRows: return "InsufficientRows";
    case ErrorCode::SingleClassInput: return "SingleClassInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TooManyFeaturesForExact: return "TooManyFeaturesForExact";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace pentrace
