#pragma once

#include <stdexcept>
#include <string>

namespace qsf {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kMultiplicityMismatch,
  kNotHermitian,
  kNotPSD,
  kBasisNotSpanning,
  kStepTooLarge,
  kInsufficientData,
  kConfig,
};

const char* to_string(ErrorCode code);

/// Exception carrying one of the library's error categories. The C API
/// translates the code into a status value.
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

}  // namespace qsf
