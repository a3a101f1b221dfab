#pragma once

#include <stdexcept>
#include <string>

namespace funfactor {

enum class ErrorKind {
  InvalidArgument,
  EmptySubject,
  NonFiniteValue,
  DimensionMismatch,
  DegenerateTimes,
  PenaltyRankError,
  NumericalPD,
  NonPositiveShape,
  DegenerateFactor,
  RankDeficiency,
  GridMismatch,
  DegenerateLabels,
  MismatchError,
  ConfigError,
  IOError,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::EmptySubject: return "EmptySubject";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DegenerateTimes: return "DegenerateTimes";
    case ErrorKind::PenaltyRankError: return "PenaltyRankError";
    case ErrorKind::NumericalPD: return "NumericalPD";
    case ErrorKind::NonPositiveShape: return "NonPositiveShape";
    case ErrorKind::DegenerateFactor: return "DegenerateFactor";
    case ErrorKind::RankDeficiency: return "RankDeficiency";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::DegenerateLabels: return "DegenerateLabels";
    case ErrorKind::MismatchError: return "MismatchError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IOError: return "IOError";
  }
  return "Unknown";
}

}  // namespace funfactor
