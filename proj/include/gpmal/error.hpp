#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gpmal {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class DataErrorKind {
    Unreadable,
    Empty,
    NonNumeric,
    MissingValue,
    RaggedRow,
    MissingLabelColumn,
    TooFewInstances,
    AlreadyScaled,
};

/// Raised while loading or transforming a dataset. Row numbers are 1-based file
/// lines (the header is line 1); column numbers are 1-based CSV fields.
class DataError : public Error {
public:
    DataError(DataErrorKind kind, std::string message, std::size_t row = 0, std::size_t column = 0)
        : Error(std::move(message)), kind_(kind), row_(row), column_(column) {}

    DataErrorKind kind() const noexcept { return kind_; }
    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    DataErrorKind kind_;
    std::size_t row_;
    std::size_t column_;
};

enum class ParseErrorKind { Malformed, UnknownPrimitive, ArityMismatch, FeatureOutOfRange, NoTrees };

/// Raised by the serialized-individual reader.
class ParseError : public Error {
public:
    ParseError(ParseErrorKind kind, std::string message, std::size_t line = 0)
        : Error(std::move(message)), kind_(kind), line_(line) {}

    ParseErrorKind kind() const noexcept { return kind_; }
    std::size_t line() const noexcept { return line_; }

private:
    ParseErrorKind kind_;
    std::size_t line_;
};

/// Configuration or argument combination that violates a documented invariant.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace gpmal
