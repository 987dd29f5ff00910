#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace invctl {

enum class ErrorCode {
  kInvalidWeights,
  kDimension,
  kInput,
  kEmptySupport,
  kIndex,
  kInsufficientData,
  kParameter,
  kDegenerateModel,
  kUnboundedProblem,
  kParse,
  kIo,
  kSolver,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can distinguish error classes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace invctl
