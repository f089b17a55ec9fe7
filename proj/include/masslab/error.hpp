#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace masslab {

enum class ErrorKind {
  InvalidArgument,
  DegenerateProfile,
  IllConditioned,
  NotPositive,
  NonConvergence,
  ZeroFunction,
  MaxIterations,
  NonPositiveMass,
  SmallnessFailed,
  AuditFailure,
  InsufficientSamples,
  NoFeasiblePoint,
  NoSignChange,
  Violation,
  NonSPDGram,
  ChartTooCoarse,
  Config,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a machine-readable kind so the
/// runner can embed it in a record instead of aborting.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DegenerateProfile: return "DegenerateProfile";
    case ErrorKind::IllConditioned: return "IllConditioned";
    case ErrorKind::NotPositive: return "NotPositive";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::ZeroFunction: return "ZeroFunction";
    case ErrorKind::MaxIterations: return "MaxIterations";
    case ErrorKind::NonPositiveMass: return "NonPositiveMass";
    case ErrorKind::SmallnessFailed: return "SmallnessFailed";
    case ErrorKind::AuditFailure: return "AuditFailure";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::NoFeasiblePoint: return "NoFeasiblePoint";
    case ErrorKind::NoSignChange: return "NoSignChange";
    case ErrorKind::Violation: return "Violation";
    case ErrorKind::NonSPDGram: return "NonSPDGram";
    case ErrorKind::ChartTooCoarse: return "ChartTooCoarse";
    case ErrorKind::Config: return "Config";
  }
  return "Unknown";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace masslab
