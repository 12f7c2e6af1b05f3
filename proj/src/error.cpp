#include "podi/error.hpp"

namespace podi {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorCode::RankOutOfRange: return "RankOutOfRange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroReference: return "ZeroReference";
    case ErrorCode::InsufficientCenters: return "InsufficientCenters";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::DuplicateCenters: return "DuplicateCenters";
    case ErrorCode::InsufficientSnapshots: return "InsufficientSnapshots";
    case ErrorCode::UnknownField: return "UnknownField";
    case ErrorCode::FieldMismatch: return "FieldMismatch";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptModel: return "CorruptModel";
    case ErrorCode::CorruptData: return "CorruptData";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::NonFiniteSignal: return "NonFiniteSignal";
    case ErrorCode::NoRealRoot: return "NoRealRoot";
    case ErrorCode::FlowOutOfRange: return "FlowOutOfRange";
    case ErrorCode::AmbiguousRoot: return "AmbiguousRoot";
    case ErrorCode::ParameterOutOfRange: return "ParameterOutOfRange";
  }
  return "Unknown";
}

}  // namespace podi
