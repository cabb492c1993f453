#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mcot {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Configuration or usage problem (maps to CLI exit code 2).
struct ConfigError : Error {
    using Error::Error;
};

/// Broken MarkovChain / triplet structure. `index` is the 1-based entry at fault.
struct ChainError : Error {
    ChainError(std::size_t index, const std::string& what)
        : Error("entry " + std::to_string(index) + ": " + what), index(index) {}
    std::size_t index;
};

/// Malformed tagged markup; `offset` is the byte offset of the problem.
struct ParseError : Error {
    ParseError(std::size_t offset, const std::string& what)
        : Error("offset " + std::to_string(offset) + ": " + what), offset(offset) {}
    std::size_t offset;
};

struct BackendError : Error {
    enum class Kind { transport, protocol, timeout, config };

    BackendError(Kind kind, const std::string& what) : Error(what), kind(kind) {}

    bool retryable() const { return kind == Kind::transport || kind == Kind::timeout; }

    Kind kind;
};

const char* to_string(BackendError::Kind kind);

/// Raised when the executor pool cannot accept more work.
struct BackpressureError : Error {
    using Error::Error;
};

/// Metric is undefined for the given input (e.g. a zero-token step in E).
struct MetricError : Error {
    using Error::Error;
};

/// Record sets given to compare() do not cover the same questions.
struct AlignmentError : Error {
    using Error::Error;
};

}  // namespace mcot
