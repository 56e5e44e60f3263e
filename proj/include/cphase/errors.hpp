#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cphase {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument violates a documented precondition (non-positive pressure,
/// crank angle outside the closed-valve span, dilution >= 1, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// The knock integral never reached 1 before exhaust valve opening.
class MisfireError : public Error {
public:
    using Error::Error;
};

/// Calibration could not make progress from a finite objective.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(format(source, line, what)), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    static std::string format(const std::string& source, std::size_t line,
                              const std::string& what) {
        std::string out = source;
        if (line > 0) out += ":" + std::to_string(line);
        return out + ": " + what;
    }

    std::size_t line_;
};

}  // namespace cphase
