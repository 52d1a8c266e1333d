#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace polymp {

enum class ErrorCode {
  InvalidArgument,
  NonPositiveFactor,
  DegenerateShear,
  ZeroExtent,
  ExteriorCollapsed,
  ParseError,
  RingTooShort,
  UnsupportedGeometry,
  MissingLabel,
  InvalidPermutation,
  TooManyVertices,
  ShapeMismatch,
  IndexOutOfRange,
  NotScalar,
  TapeConsumed,
  NanDetected,
  EmptyGraph,
  MissingGradient,
  EmptyDataset,
  LabelOutOfRange,
  IncompatibleBackbone,
  InvalidRatio,
  IOErr,
  CorruptRecord,
  IncompatibleCheckpoint,
  GradCheckFailed,
  SampleNotFound,
};

std::string_view to_string(ErrorCode code);

// Every library failure is reported through this type; `code()` is what the
// CLI prints as the machine-parsable reason.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace polymp
