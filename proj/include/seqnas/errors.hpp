#pragma once

#include <stdexcept>
#include <string>

namespace seqnas {

// Base of every error thrown by the library. The CLI maps the three families
// below onto exit codes 1 (config), 2 (data) and 3 (numeric).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad configuration or a violated API contract (shape mismatches included).
class ConfigError : public Error {
public:
    using Error::Error;
};

class ShapeError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

// Malformed or inconsistent input data.
class DataError : public Error {
public:
    using Error::Error;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t line)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line)
    {
    }
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class FormatError : public DataError {
public:
    using DataError::DataError;
};

// NaN/Inf encountered where finite values are required.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace seqnas
