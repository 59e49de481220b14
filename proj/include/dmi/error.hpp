#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dmi {

enum class ErrorCode {
  NonSquare,
  NonFinite,
  NotPositiveDefinite,
  Singular,
  DimensionMismatch,
  MissingVariable,
  UnboundVariable,
  InvalidArgument,
  NumericalLimit,
  Unstable,
  SolverFailure,
  Infeasible,
  InfeasibleAtEpsilon,
  AllInfeasible,
  SingularG,
  SingularS,
  SingularG21,
  VerificationFailed,
  NoCertificate,
  UnstableIntegration,
  ParseError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonSquare: return "NonSquare";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::MissingVariable: return "MissingVariable";
    case ErrorCode::UnboundVariable: return "UnboundVariable";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NumericalLimit: return "NumericalLimit";
    case ErrorCode::Unstable: return "Unstable";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::InfeasibleAtEpsilon: return "InfeasibleAtEpsilon";
    case ErrorCode::AllInfeasible: return "AllInfeasible";
    case ErrorCode::SingularG: return "SingularG";
    case ErrorCode::SingularS: return "SingularS";
    case ErrorCode::SingularG21: return "SingularG21";
    case ErrorCode::VerificationFailed: return "VerificationFailed";
    case ErrorCode::NoCertificate: return "NoCertificate";
    case ErrorCode::UnstableIntegration: return "UnstableIntegration";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (line searches, the CLI) can branch on the class of failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dmi
