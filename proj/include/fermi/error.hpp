#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fermi {

enum class ErrorCode {
  ZeroSpeed,
  SymmetryViolation,
  AsymmetricCurvature,
  OutOfDomain,
  InvalidDomain,
  BadExponent,
  TooFewSamples,
  AsymmetricWeight,
  NonpositiveWeight,
  NoCrossing,
  StiffFailure,
  NonConvergence,
  DegenerateCell,
  SolveFailure,
  ParseError,
  SchemaError,
  IoError,
};

inline const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ZeroSpeed: return "ZeroSpeed";
    case ErrorCode::SymmetryViolation: return "SymmetryViolation";
    case ErrorCode::AsymmetricCurvature: return "AsymmetricCurvature";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::InvalidDomain: return "InvalidDomain";
    case ErrorCode::BadExponent: return "BadExponent";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::AsymmetricWeight: return "AsymmetricWeight";
    case ErrorCode::NonpositiveWeight: return "NonpositiveWeight";
    case ErrorCode::NoCrossing: return "NoCrossing";
    case ErrorCode::StiffFailure: return "StiffFailure";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::DegenerateCell: return "DegenerateCell";
    case ErrorCode::SolveFailure: return "SolveFailure";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Expression syntax error; `offset` is the byte position where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(std::size_t offset, const std::string& message)
      : Error(ErrorCode::ParseError, message + " at offset " + std::to_string(offset)),
        offset_(offset),
        detail_(message) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t offset_;
  std::string detail_;
};

inline void require_exponent(double p) {
  if (!(p > 1.0)) throw Error(ErrorCode::BadExponent, "exponent must exceed 1, got " + std::to_string(p));
}

}  // namespace fermi
