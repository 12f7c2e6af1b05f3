#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace podi {

enum class ErrorCode {
  InvalidArgument,
  LengthMismatch,
  NonFinite,
  NumericalFailure,
  DegenerateSpectrum,
  RankOutOfRange,
  DimensionMismatch,
  ZeroReference,
  InsufficientCenters,
  SingularSystem,
  DuplicateCenters,
  InsufficientSnapshots,
  UnknownField,
  FieldMismatch,
  IoFailure,
  VersionMismatch,
  CorruptModel,
  CorruptData,
  InvalidSpec,
  NonFiniteSignal,
  NoRealRoot,
  FlowOutOfRange,
  AmbiguousRoot,
  ParameterOutOfRange,
};

/// Machine-readable reason code, e.g. "FlowOutOfRange".
std::string_view to_string(ErrorCode code) noexcept;

/// The single exception type thrown by the library. `value()` carries the
/// offending quantity when one exists (computed flow rate, condition
/// estimate, row index, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<double> value = std::nullopt)
      : std::runtime_error(message), code_(code), value_(value) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<double> value() const noexcept { return value_; }

 private:
  ErrorCode code_;
  std::optional<double> value_;
};

}  // namespace podi
