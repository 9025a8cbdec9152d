#include "brainnet/error.hpp"

namespace brainnet {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig: return "invalid-config";
    case ErrorCode::kDataValidation: return "data-validation";
    case ErrorCode::kMapping: return "mapping";
    case ErrorCode::kMapMismatch: return "map-mismatch";
    case ErrorCode::kSamplingInfeasible: return "sampling-infeasible";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kVersionMismatch: return "version-mismatch";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kChecksum: return "checksum";
    case ErrorCode::kSaturation: return "saturation";
    case ErrorCode::kUndefinedMetric: return "undefined-metric";
    case ErrorCode::kUndefinedScore: return "undefined-score";
    case ErrorCode::kDivergence: return "divergence";
  }
  return "unknown";
}

}  // namespace brainnet
