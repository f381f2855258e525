#pragma once

#include <stdexcept>
#include <string>

namespace neurphy {

enum class ErrorCode {
  kUnboundOrbit,
  kDegenerate,
  kInfeasible,
  kShapeMismatch,
  kNonFinite,
  kNonScalarRoot,
  kEmptyContext,
  kOutOfRange,
  kFormatVersionMismatch,
  kCorrupt,
  kDegenerateTarget,
  kUnknownSchema,
  kIo,
  kConfig,
};

const char* to_string(ErrorCode code) noexcept;

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace neurphy
