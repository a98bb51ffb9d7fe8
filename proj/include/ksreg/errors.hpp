#pragma once

#include <stdexcept>
#include <string>

namespace ksreg {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operands with incompatible shape (variable count, truncation order, vector length).
class DimensionError : public Error {
public:
    using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Point lies on the excluded half-line of a chart.
class ChartDomainError : public DomainError {
public:
    using DomainError::DomainError;
};

// Configuration at the collision point (u = 0 or r = 0).
class CollisionError : public DomainError {
public:
    using DomainError::DomainError;
};

// Parameters outside the set where the complete integral is built.
class ParameterError : public DomainError {
public:
    using DomainError::DomainError;
};

// Iterative solver did not reach its tolerance.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

// Newton inversion failure; carries the last iterate norm in the message.
class InversionError : public ConvergenceError {
public:
    using ConvergenceError::ConvergenceError;
};

// Numerical differentiation could not reach the requested accuracy.
class AccuracyError : public Error {
public:
    using Error::Error;
};

// Adaptive integration step size collapsed near a singular configuration.
class SingularityApproachError : public Error {
public:
    using Error::Error;
};

}  // namespace ksreg
