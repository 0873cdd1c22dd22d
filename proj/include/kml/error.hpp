#pragma once

#include <stdexcept>
#include <string>

namespace kml {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A geometric hypothesis of the construction fails (K > -1, H > 0, ...).
class HypothesisError : public Error {
 public:
  using Error::Error;
};

/// A numerical solver detected corruption or lost resolution.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Malformed input: bad configuration, invalid arguments, missing files.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace kml
