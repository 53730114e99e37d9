#include "vstain/errors.hpp"

namespace vstain {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::invalid_state: return "invalid_state";
    case ErrorKind::numeric_failure: return "numeric_failure";
    case ErrorKind::training_failure: return "training_failure";
    case ErrorKind::missing_pair: return "missing_pair";
    case ErrorKind::parse_error: return "parse_error";
    case ErrorKind::version_error: return "version_error";
    case ErrorKind::pairing_error: return "pairing_error";
    case ErrorKind::io_error: return "io_error";
    }
    return "unknown";
}

} // namespace vstain
