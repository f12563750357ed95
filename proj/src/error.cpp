#include "abfkit/error.hpp"

namespace abfkit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kOutOfDomain: return "out-of-domain";
    case ErrorCode::kRange: return "range";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kDataAcquisition: return "data-acquisition";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kInfeasible: return "infeasible";
    case ErrorCode::kTemplate: return "template";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

}  // namespace abfkit
