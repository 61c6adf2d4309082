#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pws {

enum class ErrorCode {
    InvalidArgument,
    Parse,
    Io,
    Config,
    Capability,
    Transport,
    Backend,
    Unavailable,
    Internal,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message)
        : std::runtime_error(std::move(message)), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

// Transport-level failure. Retryable by the caller; carries the indices of
// the queries whose responses are missing, when known.
class TransportError : public Error {
public:
    TransportError(std::string message, std::vector<std::size_t> indices = {})
        : Error(ErrorCode::Transport, std::move(message)),
          indices_(std::move(indices)) {}

    const std::vector<std::size_t>& affected_indices() const { return indices_; }

private:
    std::vector<std::size_t> indices_;
};

// Raised by a backend when a batch does not fit in memory. The batch executor
// reacts by halving the token budget and re-planning.
class MemoryPressure : public Error {
public:
    explicit MemoryPressure(std::string message)
        : Error(ErrorCode::Backend, std::move(message)) {}
};

}  // namespace pws
