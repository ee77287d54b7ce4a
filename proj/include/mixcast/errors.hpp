#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mixcast {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numeric / model errors (CLI exit code 3).
struct NumericError : Error {
    using Error::Error;
};

struct RowSumError : NumericError {
    std::size_t row;
    RowSumError(std::size_t r, double sum)
        : NumericError("kernel row " + std::to_string(r) + " sums to " + std::to_string(sum) +
                       ", expected 1 within 1e-12"),
          row(r) {}
};

struct NotErgodicError : NumericError {
    using NumericError::NumericError;
};

struct NoConvergenceError : NumericError {
    using NumericError::NumericError;
};

struct ContextExplosionError : NumericError {
    using NumericError::NumericError;
};

struct UnknownContextError : NumericError {
    using NumericError::NumericError;
};

struct TooShortError : NumericError {
    using NumericError::NumericError;
};

struct OversizedError : NumericError {
    using NumericError::NumericError;
};

struct DegeneratePairError : NumericError {
    using NumericError::NumericError;
};

struct PredictionOutOfRangeError : NumericError {
    using NumericError::NumericError;
};

struct UnsupportedError : NumericError {
    using NumericError::NumericError;
};

// Configuration / IO errors (CLI exit code 2).
struct ConfigError : Error {
    int line;  // 0 when not tied to a source line
    explicit ConfigError(const std::string& msg, int line_no = 0)
        : Error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + msg : msg), line(line_no) {}
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace mixcast
