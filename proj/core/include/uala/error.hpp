// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace uala {

enum class ErrorCode {
  EmptySequence,
  InvalidLogprob,
  EmptySamples,
  UnparsableConfidence,
  EmptyCalibrationSet,
  InvalidQuantile,
  InsufficientData,
  TransportError,
  CapabilityError,
  FixtureMiss,
  PartialBatch,
  MalformedAction,
  ToolTransportError,
  NoPageContext,
  AnswerExtractionFailure,
  ConfigError,
  DatasetFormatError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base of every error thrown by the library. The code is stable and is what
/// callers (and the CLI exit-code mapping) switch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class TransportError : public Error {
 public:
  TransportError(const std::string& message, int attempts, int http_status = 0);

  int attempts() const noexcept { return attempts_; }
  int http_status() const noexcept { return http_status_; }

 private:
  int attempts_;
  int http_status_;
};

class FixtureMiss : public Error {
 public:
  explicit FixtureMiss(std::string fingerprint, std::string_view what = "replay fixture");

  const std::string& fingerprint() const noexcept { return fingerprint_; }

 private:
  std::string fingerprint_;
};

class PartialBatch : public Error {
 public:
  PartialBatch(std::vector<std::size_t> succeeded, std::size_t requested, const std::string& first_error);

  const std::vector<std::size_t>& succeeded() const noexcept { return succeeded_; }
  std::size_t requested() const noexcept { return requested_; }

 private:
  std::vector<std::size_t> succeeded_;
  std::size_t requested_;
};

class DatasetFormatError : public Error {
 public:
  DatasetFormatError(std::string record_id, const std::string& detail);

  const std::string& record_id() const noexcept { return record_id_; }

 private:
  std::string record_id_;
};

}  // namespace uala
