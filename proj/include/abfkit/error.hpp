#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace abfkit {

enum class ErrorCode {
  kInvalidArgument,
  kOutOfDomain,
  kRange,
  kNumeric,
  kDataAcquisition,
  kInsufficientData,
  kInfeasible,
  kTemplate,
  kConfig,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` classifies the failure so
/// the CLI can map it onto an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace abfkit
