#pragma once

#include <stdexcept>
#include <string>

namespace gdes {

// Invalid experiment or model configuration (bad layer sizes, parameters
// out of range, malformed config file). CLI exit code 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or truncated data file (IDX magic, CIFAR record length, ...).
// CLI exit code 2.
class DataFormatError : public std::runtime_error {
public:
    explicit DataFormatError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values where finite ones are required (diverged training,
// NaN gradients). CLI exit code 3.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// A batch whose per-sample losses cannot be re-scaled (zero std or zero
// range). Callers computing metrics catch this and fall back to the
// unscaled loss for that batch.
class DegenerateBatchError : public std::runtime_error {
public:
    explicit DegenerateBatchError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gdes
