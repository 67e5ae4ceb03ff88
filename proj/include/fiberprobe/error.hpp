#pragma once

#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fiberprobe {

/// Malformed or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data: corrupted containers, metadata or grid mismatches (exit code 3).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite cost or diverged optimization (exit code 4).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void warn(std::string_view message) {
  std::cerr << "fiberprobe: warning: " << message << '\n';
}

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

}  // namespace detail
}  // namespace fiberprobe
