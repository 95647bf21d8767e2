#pragma once

#include <stdexcept>
#include <string>

namespace gapcr {

// Malformed input data or violated data invariants (bad rows, missing
// censor times, non-contiguous stages, ...).
class ParseError : public std::runtime_error {
public:
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration or argument combination.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Requested estimand is not identifiable from the data at hand (no
// qualifying events, empty stage, bootstrap starvation at a grid point).
class UnidentifiableError : public std::runtime_error {
public:
  explicit UnidentifiableError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gapcr
