// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace cdt {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or incomplete configuration (missing keys, bad ranges).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed textual input. Carries the 1-based line number when known.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class NetworkError : public Error {
public:
    explicit NetworkError(const std::string& what, bool retryable = true)
        : Error(what), retryable_(retryable) {}

    bool retryable() const noexcept { return retryable_; }

private:
    bool retryable_;
};

/// The remote signalled rate limiting; callers back off for at least `delay()`.
class RateLimited : public NetworkError {
public:
    RateLimited(const std::string& what, std::chrono::milliseconds delay)
        : NetworkError(what, true), delay_(delay) {}

    std::chrono::milliseconds delay() const noexcept { return delay_; }

private:
    std::chrono::milliseconds delay_;
};

/// A pipeline stage failed; `stage()` names it.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace cdt
