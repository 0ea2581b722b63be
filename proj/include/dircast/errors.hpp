#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dircast {

// Base class for every error raised by the library. The CLI maps these to
// exit code 1; anything else escaping to main is a bug.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed textual input (CSV, JSON, dates). Messages carry line numbers
// where the input is line-oriented.
class ParseError : public Error {
public:
    using Error::Error;
};

// Structurally valid input with values that violate a contract
// (non-positive price, duplicate date, missing config key).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Operation called outside its domain (lag >= length, dimension mismatch).
class DomainError : public Error {
public:
    using Error::Error;
};

// Calendar alignment failed: a forward fill had no prior observation.
class AlignmentError : public Error {
public:
    using Error::Error;
};

// Data that is degenerate for the requested operation (all-zero spectrum,
// single-class training set).
class DegenerateError : public Error {
public:
    using Error::Error;
};

// A rolling window could not be assembled (insufficient lead data, empty
// train or test slice).
class AssemblyError : public Error {
public:
    using Error::Error;
};

// An iterative solver hit its cap before meeting its tolerance.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& message, std::int64_t iterations,
                     double residual)
        : Error(message), iterations(iterations), residual(residual) {}

    std::int64_t iterations = 0;
    double residual = 0.0;
};

// Invariant breach that indicates a defect, not bad input.
class InternalError : public Error {
public:
    using Error::Error;
};

}  // namespace dircast
