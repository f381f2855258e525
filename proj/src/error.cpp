#include "neurphy/error.hpp"

namespace neurphy {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kUnboundOrbit: return "UnboundOrbit";
    case ErrorCode::kDegenerate: return "Degenerate";
    case ErrorCode::kInfeasible: return "Infeasible";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kNonScalarRoot: return "NonScalarRoot";
    case ErrorCode::kEmptyContext: return "EmptyContext";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kFormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::kCorrupt: return "Corrupt";
    case ErrorCode::kDegenerateTarget: return "DegenerateTarget";
    case ErrorCode::kUnknownSchema: return "UnknownSchema";
    case ErrorCode::kIo: return "IO";
    case ErrorCode::kConfig: return "Config";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace neurphy
