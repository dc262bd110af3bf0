#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace actguard {

enum class ErrorCode {
  InvalidArgument,
  UnknownDialect,
  MalformedCanonical,
  ParseError,
  MissingGroundTruthTarget,
  EmptyInput,
  OneClassOnly,
  RoundMismatch,
  UnbalancedDelta,
  SchemaViolation,
  BackendUnavailable,
  ProtocolError,
  EmptyCandidates,
  DegenerateData,
  NonFinite,
  FeatureSpecMismatch,
  MissingStepPlan,
  ImageDecodeError,
  MissingFlags,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  bool retryable() const noexcept {
    return code_ == ErrorCode::BackendUnavailable || code_ == ErrorCode::ProtocolError;
  }

 private:
  ErrorCode code_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t offset, std::string reason)
      : Error(ErrorCode::ParseError,
              "parse error at offset " + std::to_string(offset) + ": " + reason),
        offset_(offset),
        reason_(std::move(reason)) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t offset_;
  std::string reason_;
};

class SchemaViolation : public Error {
 public:
  SchemaViolation(std::size_t line_no, std::string reason)
      : Error(ErrorCode::SchemaViolation,
              "schema violation at line " + std::to_string(line_no) + ": " + reason),
        line_no_(line_no),
        reason_(std::move(reason)) {}

  std::size_t line_no() const noexcept { return line_no_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_no_;
  std::string reason_;
};

}  // namespace actguard
