#pragma once

#include <stdexcept>
#include <string>

namespace companion {

/// File or wire data that violates a documented schema. Message carries the
/// location (path, line, field) when known.
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Caller passed arguments outside an operation's contract.
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A judge backend failed to produce usable signals.
struct JudgeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A pluggable generation backend failed or exhausted its retry budget.
struct BackendError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace companion
