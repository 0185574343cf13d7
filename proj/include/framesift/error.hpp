#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace framesift {

enum class ErrorCode {
  InvalidConfig,
  InvalidInput,
  GridTooFine,
  NonFiniteInput,
  BadMagic,
  TruncatedPayload,
  TrailingData,
  ZeroDimension,
  WindowNonPositive,
  VideoTooShort,
  BadCount,
  NotEnoughFrames,
  MissingGroup,
  IncompleteGroup,
  DuplicateEntry,
  ScorerUnavailable,
  MalformedResponse,
  ManifestInvalid,
  UnknownId,
  CorruptRecord,
  DimTooSmall,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library. `field()` is set for InvalidConfig
/// and names the offending configuration key.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string field = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        field_(std::move(field)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorCode code_;
  std::string field_;
};

}  // namespace framesift
