#pragma once

#include <stdexcept>
#include <string>

namespace nfdrl {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A return value that lies outside the open support (-g_max, g_max).
class OutOfSupportError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Iterative procedure failed to bracket or converge.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration; `field()` names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace nfdrl
