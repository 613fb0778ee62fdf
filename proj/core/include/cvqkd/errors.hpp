#pragma once

#include <stdexcept>
#include <string>

namespace cvqkd {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Scalar argument outside its mathematical domain.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Matrix input violates the symmetry tolerance.
class NonSymmetricError : public Error {
public:
    using Error::Error;
};

/// Covariance matrix violates the uncertainty bound (symplectic eigenvalue < 1).
class UnphysicalError : public Error {
public:
    using Error::Error;
};

/// An iterative numerical routine failed to converge or produced non-finite values.
class NumericalFailureError : public Error {
public:
    using Error::Error;
};

/// Modulation variance too small for the entangled-source mapping to exist.
class SingularModulationError : public Error {
public:
    using Error::Error;
};

/// Requested noise split is outside the physically admissible interval.
class AllocationOutOfRangeError : public Error {
public:
    using Error::Error;
};

/// Key rate is non-positive at the lower end of a tolerance search axis.
class NoPositiveKeyError : public Error {
public:
    using Error::Error;
};

/// Bisection bracket could not be maintained (objective not evaluable or sign structure lost).
class BracketingFailureError : public Error {
public:
    using Error::Error;
};

/// Objective failed on nearly every grid point of an optimization problem.
class EvaluationFailureError : public Error {
public:
    using Error::Error;
};

} // namespace cvqkd
