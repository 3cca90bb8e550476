/**
 * @file error.hpp
 * @brief Exception hierarchy shared by all ifx modules.
 */
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ifx {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data could not be used (bad file, inconsistent records, too-short series).
class DataError : public Error {
public:
    using Error::Error;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t line)
        : DataError(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    /// 1-based source line, 0 when unknown.
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class EmptyDataset : public DataError {
public:
    using DataError::DataError;
};

class ConsistencyError : public DataError {
public:
    using DataError::DataError;
};

class TooShort : public DataError {
public:
    using DataError::DataError;
};

class KeyError : public Error {
public:
    using Error::Error;
};

class ModelError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

} // namespace ifx
