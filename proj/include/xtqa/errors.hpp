#pragma once

#include <stdexcept>
#include <string>

namespace xtqa {

// Bad input data: malformed files, schema violations, missing records.
// Mapped to process exit code 2 by the CLI.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values detected during training or inference.
// Mapped to process exit code 3 by the CLI.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Bad command-line or config usage. Mapped to exit code 1.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace xtqa
