#pragma once

#include <stdexcept>
#include <string>

namespace fqed {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid model, grid or cutoff parameters.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Input outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A configured size limit would be exceeded.
class ResourceError : public Error {
public:
    using Error::Error;
};

/// Operands built on incompatible bases or grids.
class MismatchError : public Error {
public:
    using Error::Error;
};

/// Iterative solver failed to reach its tolerance.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double best_residual)
        : Error(what), best_residual_(best_residual) {}
    double best_residual() const noexcept { return best_residual_; }

private:
    double best_residual_;
};

/// Shift too close to the spectrum for a reliable solve.
class ConditioningError : public Error {
public:
    using Error::Error;
};

/// A contour does not isolate exactly one eigenvalue.
class ContourError : public Error {
public:
    using Error::Error;
};

/// Fock truncation lost more weight than allowed.
class TruncationError : public Error {
public:
    using Error::Error;
};

/// Malformed configuration input.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Failure inside a cascade step, tagged with the scale index.
class CascadeError : public Error {
public:
    CascadeError(int scale, const std::string& what)
        : Error("scale " + std::to_string(scale) + ": " + what), scale_(scale) {}
    int scale() const noexcept { return scale_; }

private:
    int scale_;
};

}  // namespace fqed
