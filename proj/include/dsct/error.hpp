#pragma once

#include <stdexcept>
#include <string>

namespace dsct {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent input data (CLI exit code 3).
class DataError : public Error {
public:
    using Error::Error;
};

/// Non-finite or overflowing intermediate values (CLI exit code 4).
class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace dsct
