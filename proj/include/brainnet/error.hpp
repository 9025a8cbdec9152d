#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace brainnet {

enum class ErrorCode {
  kInvalidConfig,
  kDataValidation,
  kMapping,
  kMapMismatch,
  kSamplingInfeasible,
  kShape,
  kIo,
  kVersionMismatch,
  kTruncated,
  kChecksum,
  kSaturation,
  kUndefinedMetric,
  kUndefinedScore,
  kDivergence,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this type; callers that need to
// branch on the failure kind inspect code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace brainnet
