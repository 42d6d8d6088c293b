#include "ashbm/error.hpp"

namespace ashbm {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroMatrix: return "ZeroMatrix";
    case ErrorCode::InconsistentSystem: return "InconsistentSystem";
    case ErrorCode::InvalidRank: return "InvalidRank";
    case ErrorCode::InvalidBlockSize: return "InvalidBlockSize";
    case ErrorCode::Unsupported: return "Unsupported";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ZeroSketchResidual: return "ZeroSketchResidual";
    case ErrorCode::DegenerateDirection: return "DegenerateDirection";
    case ErrorCode::StalledSampling: return "StalledSampling";
    case ErrorCode::Breakdown: return "Breakdown";
    case ErrorCode::AlreadySolved: return "AlreadySolved";
    case ErrorCode::ExactConvergence: return "ExactConvergence";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace ashbm
