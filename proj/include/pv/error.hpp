#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pv {

enum class Errc {
  InvalidArgument,
  InvalidTransform,
  DegenerateFrame,
  AngleNearPi,
  CountExceedsCloud,
  DimensionMismatch,
  EmptySegment,
  IoError,
  ParseError,
  UnsupportedProperty,
  TooFewPoints,
  ModelNotStandardized,
  SegmentTooSmall,
  LengthMismatch,
  UnknownModel,
  EmptyDatabase,
  DatabaseTooSmall,
  NoClusterSurvives,
  NoCorrespondences,
};

std::string_view errc_name(Errc code) noexcept;

/// Library-wide exception. Every failure carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace pv
