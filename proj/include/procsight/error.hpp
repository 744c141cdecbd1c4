#pragma once

#include <stdexcept>
#include <string>

namespace procsight {

enum class ErrorKind {
    parse,        // malformed input text
    schema,       // well-formed input that violates a record or feature schema
    unsupported,  // event ID outside the collected Sysmon set
    ordering,     // timestamps or snapshot times out of order
    shape,        // tensor dimension mismatch
    numeric,      // non-finite value during forward/backward/training
    partition,    // dataset cannot be split as requested
    precondition, // caller violated an operation's precondition
    config,       // invalid configuration
    corruption,   // checksum mismatch or truncated artifact
    version,      // unsupported format_version
    range,        // disjoint or out-of-range horizons
    io,           // filesystem failure
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Malformed JSON; carries the byte offset reported by the parser.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t byte_offset)
        : Error(ErrorKind::parse, message), byte_offset_(byte_offset) {}

    std::size_t byte_offset() const noexcept { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

/// Non-finite intermediate; step is the sequence step or epoch index involved.
class NumericError : public Error {
public:
    NumericError(const std::string& message, long step)
        : Error(ErrorKind::numeric, message), step_(step) {}

    long step() const noexcept { return step_; }

private:
    long step_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) fail(kind, message);
}

/// CLI exit code for an error kind: 2 validation, 3 data, 4 numeric.
int exit_code_for(ErrorKind kind) noexcept;

} // namespace procsight
