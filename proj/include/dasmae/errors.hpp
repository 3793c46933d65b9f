#pragma once

#include <stdexcept>
#include <string>

namespace dasmae {

// Root of every error the library throws. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand shapes that cannot be combined.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Axis or element index outside its range.
class IndexError : public Error {
public:
    using Error::Error;
};

// Caller violated a documented precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

// Malformed, missing, or inconsistent input data and files.
class DataError : public Error {
public:
    using Error::Error;
};

// NaN/Inf encountered during training.
class NumericError : public Error {
public:
    using Error::Error;
};

// Strict checkpoint load found a missing or mis-shaped parameter.
class TransferError : public Error {
public:
    using Error::Error;
};

// Bad command line or config value.
class UsageError : public Error {
public:
    using Error::Error;
};

}  // namespace dasmae
