#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pentrace {

enum class ErrorCode {
  MalformedInput,
  NonMonotonicTime,
  TooShort,
  NegativeForce,
  EmptyWriting,
  DegenerateTilt,
  TooShortForTremor,
  SiftDiverged,
  AllZeroSpectra,
  TooShortForRqa,
  MissingTask,
  DuplicateSubject,
  UnknownGroup,
  InsufficientRows,
  SingleClassInput,
  DimensionMismatch,
  TooManyFeaturesForExact,
  ConfigInvalid,
  MissingArtifact,
  InvalidArgument,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

// All recoverable failures in the library surface as this exception; the
// code is stable and is what the CLI writes into its error record.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pentrace
