#pragma once

#include <stdexcept>
#include <string>

namespace driftfb {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside an operation's domain (non-finite, wrong range, bad shape).
class InvalidInput : public Error {
public:
    using Error::Error;
};

class UnsupportedDimension : public Error {
public:
    using Error::Error;
};

// A quadrature did not reach the requested precision.
class QuadratureError : public Error {
public:
    QuadratureError(const std::string& what, double achieved)
        : Error(what), achieved_error(achieved) {}
    double achieved_error;
};

// Discrete operator is not an M-matrix; `row` is the first offending node.
class MMatrixViolation : public Error {
public:
    MMatrixViolation(const std::string& what, std::size_t row_index)
        : Error(what), row(row_index) {}
    std::size_t row;
};

class SolverError : public Error {
public:
    using Error::Error;
};

class AnalysisError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace driftfb
