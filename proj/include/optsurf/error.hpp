#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace optsurf {

enum class ErrorCode {
  NonMonotoneMapping,
  NonFiniteValue,
  InvalidPenalty,
  InvalidArgument,
  IndexOutOfRange,
  NegativeDataCost,
  CapacityOverflow,
  Infeasible,
  InternalInconsistency,
  UnstableStep,
  ProbabilityOutOfRange,
  LabelOutOfRange,
  SearchSpaceTooLarge,
  ColumnSetMismatch,
  EmptySurface,
  DimMismatch,
  ZeroReferenceArea,
  EmptyContour,
  SurfacesOutOfOrder,
  FactorExceedsDim,
  ConfigInvalid,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonMonotoneMapping: return "NonMonotoneMapping";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::InvalidPenalty: return "InvalidPenalty";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::NegativeDataCost: return "NegativeDataCost";
    case ErrorCode::CapacityOverflow: return "CapacityOverflow";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::InternalInconsistency: return "InternalInconsistency";
    case ErrorCode::UnstableStep: return "UnstableStep";
    case ErrorCode::ProbabilityOutOfRange: return "ProbabilityOutOfRange";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::SearchSpaceTooLarge: return "SearchSpaceTooLarge";
    case ErrorCode::ColumnSetMismatch: return "ColumnSetMismatch";
    case ErrorCode::EmptySurface: return "EmptySurface";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::ZeroReferenceArea: return "ZeroReferenceArea";
    case ErrorCode::EmptyContour: return "EmptyContour";
    case ErrorCode::SurfacesOutOfOrder: return "SurfacesOutOfOrder";
    case ErrorCode::FactorExceedsDim: return "FactorExceedsDim";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by validate_mapping; `index()` is the first k with L(k) <= L(k-1).
class NonMonotoneMappingError : public Error {
 public:
  NonMonotoneMappingError(std::size_t index, const std::string& what)
      : Error(ErrorCode::NonMonotoneMapping, what), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace optsurf
