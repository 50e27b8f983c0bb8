#pragma once

#include <stdexcept>
#include <string>

namespace embfair {

// Base class for every error raised by the toolkit. The CLI maps subclasses
// to exit codes: config 2, missing upstream 3, numerical failure 4.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class InvalidInputError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class MissingUpstreamError : public Error {
public:
    using Error::Error;
};

class UnsupportedOperationError : public Error {
public:
    using Error::Error;
};

// Numerical failures ------------------------------------------------------

class NumericalError : public Error {
public:
    using Error::Error;
};

// p(he|t) + p(she|t) == 0: the two-point gender distribution cannot be
// renormalized.
class DegenerateDistributionError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DegenerateStatisticsError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class TrainingFailureError : public NumericalError {
public:
    TrainingFailureError(const std::string& msg, int iteration)
        : NumericalError(msg), iteration(iteration) {}
    int iteration;
};

class OptimizationFailureError : public NumericalError {
public:
    OptimizationFailureError(const std::string& msg, int iteration)
        : NumericalError(msg), iteration(iteration) {}
    int iteration;
};

// Template search exhausted its restart budget for one occupation.
class GenerationFailureError : public NumericalError {
public:
    GenerationFailureError(const std::string& msg, std::string occupation)
        : NumericalError(msg), occupation(std::move(occupation)) {}
    std::string occupation;
};

}  // namespace embfair
