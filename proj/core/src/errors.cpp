#include "wdro/errors.hpp"

namespace wdro {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::unimplemented: return "unimplemented";
    case ErrorCode::sampling_stalled: return "sampling-stalled";
    case ErrorCode::numeric_failure: return "numeric-failure";
    case ErrorCode::unbounded_dual: return "unbounded-dual";
    case ErrorCode::convergence_failure: return "convergence-failure";
    case ErrorCode::config_error: return "config-error";
  }
  return "unknown";
}

}  // namespace wdro
