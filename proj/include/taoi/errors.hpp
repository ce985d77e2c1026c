#pragma once

#include <stdexcept>
#include <string>

namespace taoi {

// Argument outside the mathematical domain of an operation (d <= 0, t < t', ...).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// A quantity was requested that has no defined value yet (empty window,
// pair with no reception history, vehicle with no neighbors).
class UndefinedValueError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Lookup outside the covered span of a trajectory.
class OutOfRangeError : public std::out_of_range {
public:
  using std::out_of_range::out_of_range;
};

// Input file could not be parsed. Carries the 1-based line number (0 when
// the error is not tied to a single line).
class ParseError : public std::runtime_error {
public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

// Structurally valid input that violates a format rule (e.g. non-uniform tick).
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration value. `key_path` is the dotted path of the offending key.
class ConfigError : public std::invalid_argument {
public:
  ConfigError(const std::string& key_path, const std::string& what)
      : std::invalid_argument(key_path + ": " + what), key_path_(key_path) {}
  const std::string& key_path() const noexcept { return key_path_; }

private:
  std::string key_path_;
};

// Internal bookkeeping contradiction (e.g. a success outside the in-range set).
class ConsistencyError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

}  // namespace taoi
