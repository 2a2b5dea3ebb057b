#pragma once

#include <stdexcept>
#include <string>

namespace rrtrack {

/// Tensor dimensions that do not fit the operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// NaN/Inf where finite values are required.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// API misuse (e.g. backward on a non-scalar).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed files or inputs coming from outside the process.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rrtrack
