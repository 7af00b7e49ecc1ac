#pragma once

#include <stdexcept>
#include <string>

namespace streakfit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parabolic or hyperbolic input where only bound orbits are handled.
class UnsupportedOrbit : public Error {
 public:
  using Error::Error;
};

/// Singular or otherwise unusable observation geometry.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver ran out of iterations.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace streakfit
