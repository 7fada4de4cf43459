// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace attentrack {

/// Base of every error thrown by the library. `exit_code()` is the process
/// status the CLI reports for it.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

/// Operand shapes do not fit the operation.
class DimensionError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

/// Index outside its valid range (class target, association column, ...).
class IndexError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

/// Caller broke a precondition of the API.
class ContractError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

/// Invalid value handed to a pure function (non-finite angle, ...).
class InputError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

/// Invalid configuration; the message names the offending field path.
class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

/// Malformed or incompatible input data (schema mismatch, unreadable file).
class DataError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// Frames presented out of timestamp order.
class SequencingError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

}  // namespace attentrack
