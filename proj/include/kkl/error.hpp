#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace kkl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad arguments, dimension mismatches, out-of-range configuration.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed (singular system, non-convergence).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Raised by solve_linear when the system is singular or too ill-conditioned.
class SingularMatrixError : public NumericalError {
public:
    SingularMatrixError(const std::string& what, double condition)
        : NumericalError(what), condition_(condition) {}
    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

/// The data carries no usable variation (constant features, constant regressors).
class DegenerateDataError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// ODE integration aborted; `last_time()` is the last accepted instant.
class IntegrationError : public NumericalError {
public:
    IntegrationError(const std::string& what, double last_time)
        : NumericalError(what), last_time_(last_time) {}
    double last_time() const noexcept { return last_time_; }

private:
    double last_time_;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed file content. The message names the file and the line or byte offset.
class ParseError : public IoError {
public:
    using IoError::IoError;
};

}  // namespace kkl
