// SPDX-License-Identifier: Apache-2.0
#include "uala/error.hpp"

#include <fmt/format.h>

namespace uala {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::InvalidLogprob: return "InvalidLogprob";
    case ErrorCode::EmptySamples: return "EmptySamples";
    case ErrorCode::UnparsableConfidence: return "UnparsableConfidence";
    case ErrorCode::EmptyCalibrationSet: return "EmptyCalibrationSet";
    case ErrorCode::InvalidQuantile: return "InvalidQuantile";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::CapabilityError: return "CapabilityError";
    case ErrorCode::FixtureMiss: return "FixtureMiss";
    case ErrorCode::PartialBatch: return "PartialBatch";
    case ErrorCode::MalformedAction: return "MalformedAction";
    case ErrorCode::ToolTransportError: return "ToolTransportError";
    case ErrorCode::NoPageContext: return "NoPageContext";
    case ErrorCode::AnswerExtractionFailure: return "AnswerExtractionFailure";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::DatasetFormatError: return "DatasetFormatError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(fmt::format("{}: {}", to_string(code), message)), code_(code) {}

TransportError::TransportError(const std::string& message, int attempts, int http_status)
    : Error(ErrorCode::TransportError,
            fmt::format("{} (attempts={}, http_status={})", message, attempts, http_status)),
      attempts_(attempts),
      http_status_(http_status) {}

FixtureMiss::FixtureMiss(std::string fingerprint, std::string_view what)
    : Error(ErrorCode::FixtureMiss, fmt::format("{} has no entry for fingerprint {}", what, fingerprint)),
      fingerprint_(std::move(fingerprint)) {}

PartialBatch::PartialBatch(std::vector<std::size_t> succeeded, std::size_t requested,
                           const std::string& first_error)
    : Error(ErrorCode::PartialBatch,
            fmt::format("{} of {} samples succeeded; first failure: {}", succeeded.size(), requested,
                        first_error)),
      succeeded_(std::move(succeeded)),
      requested_(requested) {}

DatasetFormatError::DatasetFormatError(std::string record_id, const std::string& detail)
    : Error(ErrorCode::DatasetFormatError, fmt::format("record '{}': {}", record_id, detail)),
      record_id_(std::move(record_id)) {}

}  // namespace uala
