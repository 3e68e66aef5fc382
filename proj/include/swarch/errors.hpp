#pragma once

#include <stdexcept>
#include <string>

namespace swarch {

// Precondition violated by the caller (bad parameter, wrong window length, ...).
class DomainError : public std::invalid_argument {
public:
    explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

// Malformed or insufficient input data (CSV files, missing tenors, short history).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// A numerical procedure could not produce a result (no root bracket, zero mass, ...).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace swarch
