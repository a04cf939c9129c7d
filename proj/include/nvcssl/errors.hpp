#pragma once

#include <stdexcept>
#include <string>

namespace nvcssl {

// Base for every error the library raises on purpose. Anything else escaping
// a call is a bug.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input text (CSV cell, config line). Carries the row when known.
class ParseError : public Error {
public:
    using Error::Error;
};

// Well-formed input that violates a data invariant (duplicate times, NaN, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Caller passed a parameter outside its documented range.
class ArgumentError : public Error {
public:
    using Error::Error;
};

// Evaluation point outside the spline support.
class DomainError : public Error {
public:
    using Error::Error;
};

// Overflow, underflow or non-finite intermediate.
class NumericError : public Error {
public:
    using Error::Error;
};

// Cholesky failure on an explicit covariance block.
class DecompositionError : public NumericError {
public:
    using NumericError::NumericError;
};

}  // namespace nvcssl
