#pragma once

#include <stdexcept>
#include <string>

namespace swarmlfa {

/// Malformed or missing input data. Maps to CLI exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inconsistent dimensions or an invalid configuration. Maps to exit code 3.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A training step produced a non-finite value. Maps to exit code 4.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace swarmlfa
