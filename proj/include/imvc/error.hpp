#pragma once

#include <stdexcept>
#include <string>

namespace imvc {

// Malformed input data: files, shapes, label sets.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid parameter or configuration value.
struct ConfigError : std::invalid_argument {
    explicit ConfigError(const std::string& msg) : std::invalid_argument(msg) {}
};

// API misuse: mismatched shapes, stale caches, violated preconditions.
struct ContractError : std::logic_error {
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Optimization produced a non-finite value.
struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace imvc
