#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace letspi {

enum class ErrorCode {
  Precondition,
  MissingColumn,
  NonNumericCell,
  DuplicateKey,
  NTooLarge,
  CoincidentVehicles,
  DegenerateGoal,
  NonPositiveGap,
  NoAdjacentLane,
  LlmUnavailable,
  ParseFailure,
  SchemaFailure,
  Timeout,
  TransportFailure,
  BackendRefusal,
  ScriptExhausted,
  StorageFull,
  IoFailure,
  InvalidRecord,
  RecipeError,
  ConfigError,
  DatasetError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Precondition: return "Precondition";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonNumericCell: return "NonNumericCell";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::NTooLarge: return "NTooLarge";
    case ErrorCode::CoincidentVehicles: return "CoincidentVehicles";
    case ErrorCode::DegenerateGoal: return "DegenerateGoal";
    case ErrorCode::NonPositiveGap: return "NonPositiveGap";
    case ErrorCode::NoAdjacentLane: return "NoAdjacentLane";
    case ErrorCode::LlmUnavailable: return "LlmUnavailable";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::SchemaFailure: return "SchemaFailure";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::TransportFailure: return "TransportFailure";
    case ErrorCode::BackendRefusal: return "BackendRefusal";
    case ErrorCode::ScriptExhausted: return "ScriptExhausted";
    case ErrorCode::StorageFull: return "StorageFull";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::InvalidRecord: return "InvalidRecord";
    case ErrorCode::RecipeError: return "RecipeError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::DatasetError: return "DatasetError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace letspi
