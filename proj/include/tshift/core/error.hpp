#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tshift {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Invalid configuration. `field` is a dotted path such as "regimes[1].positivity".
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& what)
        : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)), message_(what) {}

    const std::string& field() const noexcept { return field_; }
    /// The message without the field prefix.
    const std::string& message() const noexcept { return message_; }

private:
    std::string field_;
    std::string message_;
};

/// A precondition on data contents does not hold (single-class data, gap month, ...).
class DataError : public Error {
public:
    using Error::Error;
};

/// Transient failure of an external service; the caller may retry.
class RetriableError : public Error {
public:
    using Error::Error;
};

}  // namespace tshift
