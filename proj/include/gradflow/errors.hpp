#pragma once

#include <stdexcept>
#include <string>

namespace gradflow {

// Bad or inconsistent user configuration; maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values, divergence, solver exhaustion; maps to CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// A certificate premise fails (e.g. gain above the ceiling); maps to CLI exit code 4.
class CertificationError : public std::runtime_error {
 public:
  explicit CertificationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gradflow
