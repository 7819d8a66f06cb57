#pragma once

#include <stdexcept>
#include <string>

namespace healthwatch {

/// Malformed or inconsistent input data (bad files, conflicting rows, contract violations on data).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller passed arguments outside an operation's preconditions.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Weight file could not be decoded.
class ModelFormatError : public DataError {
public:
    using DataError::DataError;
};

} // namespace healthwatch
