#pragma once

#include <stdexcept>
#include <string>

namespace mmw {

enum class ErrorCode {
    InvalidArgument = 1,
    Outage,
    Degenerate,
    Parse,
    Io,
    Convergence,
    Tolerance,
    Internal,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

// Literal overload keeps the hot path free of string construction.
inline void require(bool cond, const char* what) {
    if (!cond) fail(ErrorCode::InvalidArgument, what);
}
inline void require(bool cond, const std::string& what) {
    if (!cond) fail(ErrorCode::InvalidArgument, what);
}

}  // namespace mmw
