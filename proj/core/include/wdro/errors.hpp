#pragma once

#include <stdexcept>
#include <string>

namespace wdro {

enum class ErrorCode {
  invalid_argument,
  unimplemented,
  sampling_stalled,
  numeric_failure,
  unbounded_dual,
  convergence_failure,
  config_error,
};

const char* to_string(ErrorCode code);

/// Base error for every failure raised by the library.
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

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorCode::invalid_argument, what);
}

}  // namespace wdro
