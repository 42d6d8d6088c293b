#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ashbm {

enum class ErrorCode {
  DimensionMismatch,
  ZeroMatrix,
  InconsistentSystem,
  InvalidRank,
  InvalidBlockSize,
  Unsupported,
  ParseError,
  ZeroSketchResidual,
  DegenerateDirection,
  StalledSampling,
  Breakdown,
  AlreadySolved,
  ExactConvergence,
  ConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (CLI, bindings) can map it to an exit status or exception type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace ashbm
