#pragma once

#include <stdexcept>

namespace bitecast {

// Error taxonomy shared by all modules. Every condition a caller can provoke
// maps to one of these; internal contract violations are plain asserts.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Arguments outside an operation's documented domain.
struct InvalidInputError : Error {
  using Error::Error;
};

// A resource (disjoint bites, pool columns) has been exhausted.
struct CapacityError : Error {
  using Error::Error;
};

// Malformed text input; messages carry a line number where one exists.
struct ParseError : Error {
  using Error::Error;
};

// Mismatched run configuration, e.g. a table that does not fit the request.
struct ConfigError : Error {
  using Error::Error;
};

// Filesystem and serialization failures.
struct IoError : Error {
  using Error::Error;
};

}  // namespace bitecast
