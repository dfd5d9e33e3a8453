#pragma once

#include <stdexcept>
#include <string>

namespace semivar {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Shape or index mismatch between inputs.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Input data violates a documented invariant (bad file, bad table, bad config).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Chain has no unique stationary distribution (more than one closed
/// communicating class) or a linear solve degenerated.
class SingularChainError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A bracketed 1-d solve ran out of bracket.
class BracketError : public Error {
public:
    using Error::Error;
};

/// A numerical routine could not reach its requested tolerance.
class PrecisionError : public Error {
public:
    using Error::Error;
};

/// Two independent computations of the same quantity disagree; indicates a
/// bug in the caller or in the library, never a user input problem.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

} // namespace semivar
