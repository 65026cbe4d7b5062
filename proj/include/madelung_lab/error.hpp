#ifndef MADELUNG_LAB_ERROR_HPP
#define MADELUNG_LAB_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace madelung_lab {

enum class ErrorCode {
  InvalidArgument,
  NonFinite,
  SchemeBoundaryMismatch,
  MethodBoundaryMismatch,
  NormDrift,
  GridTooNarrow,
  DegenerateDensity,
  DiffusionAtZero,
  RegimeMismatch,
  TailTruncation,
  InsufficientSnapshots,
  EmptyEnsemble,
  SeedMismatch,
  InvalidConfig,
  UnknownParameter,
  MissingArtifact,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::SchemeBoundaryMismatch: return "SchemeBoundaryMismatch";
    case ErrorCode::MethodBoundaryMismatch: return "MethodBoundaryMismatch";
    case ErrorCode::NormDrift: return "NormDrift";
    case ErrorCode::GridTooNarrow: return "GridTooNarrow";
    case ErrorCode::DegenerateDensity: return "DegenerateDensity";
    case ErrorCode::DiffusionAtZero: return "DiffusionAtZero";
    case ErrorCode::RegimeMismatch: return "RegimeMismatch";
    case ErrorCode::TailTruncation: return "TailTruncation";
    case ErrorCode::InsufficientSnapshots: return "InsufficientSnapshots";
    case ErrorCode::EmptyEnsemble: return "EmptyEnsemble";
    case ErrorCode::SeedMismatch: return "SeedMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::UnknownParameter: return "UnknownParameter";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace madelung_lab

#endif  // MADELUNG_LAB_ERROR_HPP
