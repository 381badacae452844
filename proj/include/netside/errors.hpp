#pragma once

#include <stdexcept>
#include <string>

namespace netside {

// Error taxonomy shared by the library and the CLI. The CLI maps each class to a
// distinct process exit code (see cli.cpp), so new failure modes should reuse one
// of these rather than throwing std::runtime_error directly.

struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SchemaError : std::runtime_error {
    explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InsufficientDataError : std::runtime_error {
    explicit InsufficientDataError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace netside
