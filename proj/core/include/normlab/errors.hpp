// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace normlab {

// Error taxonomy mirrored by the CLI exit codes: config -> 1, data -> 2,
// divergence -> 3. Everything else (std::invalid_argument from shape checks,
// std::domain_error from math preconditions) is treated as a usage error.

class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class DivergenceError : public std::runtime_error {
public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace normlab
