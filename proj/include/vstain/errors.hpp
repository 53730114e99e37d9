#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vstain {

enum class ErrorKind {
    invalid_argument,
    invalid_state,
    numeric_failure,
    training_failure,
    missing_pair,
    parse_error,
    version_error,
    pairing_error,
    io_error,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Single exception type for the library; `kind` is what the CLI reports.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

inline void require(bool cond, const std::string& message) {
    if (!cond) fail(ErrorKind::invalid_argument, message);
}

} // namespace vstain
