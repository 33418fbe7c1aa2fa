#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mvptm {

enum class ErrorCode {
  UnterminatedLiteral,
  NotAFunction,
  UnbalancedBraces,
  SchemaError,
  ShapeMismatch,
  EmptyPool,
  NotScalar,
  LengthExceeded,
  MissingEmbeddings,
  LabelOutOfRange,
  BatchTooSmall,
  FileNotFound,
  EmptyDataset,
  DivergedLoss,
  CorruptCheckpoint,
  VersionMismatch,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can branch on the kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnterminatedLiteral: return "UnterminatedLiteral";
    case ErrorCode::NotAFunction: return "NotAFunction";
    case ErrorCode::UnbalancedBraces: return "UnbalancedBraces";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::NotScalar: return "NotScalar";
    case ErrorCode::LengthExceeded: return "LengthExceeded";
    case ErrorCode::MissingEmbeddings: return "MissingEmbeddings";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::BatchTooSmall: return "BatchTooSmall";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace mvptm
