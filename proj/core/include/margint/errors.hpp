#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace margint {

/// A configuration document violated one or more model conditions. Each
/// entry of violations() starts with the condition label, e.g. "(F.2): ...".
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// Malformed or inconsistent input data (path files, empty paths).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The regression estimate has no kernel mass at a requested point.
class UndefinedEstimate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace margint
