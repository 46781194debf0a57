#pragma once

#include <stdexcept>
#include <string>

namespace qlbgk {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad grid size, shape mismatch or out-of-range parameter.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Unknown preset, malformed config file, unusable CLI option.
class InvalidConfig : public Error {
public:
  using Error::Error;
};

/// An iterative solver (eigensolver, NLCG, line search) gave up.
class ConvergenceError : public Error {
public:
  using Error::Error;
};

/// A linear system hit a zero pivot or failed its residual check.
class SingularSystemError : public Error {
public:
  using Error::Error;
};

/// A density operator acquired a weight below the round-off clamp.
class PositivityError : public Error {
public:
  using Error::Error;
};

} // namespace qlbgk
