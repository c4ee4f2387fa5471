#pragma once

#include <stdexcept>
#include <string>

namespace skewlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Root search could not bracket the requested value.
class NoBracket : public Error {
 public:
  using Error::Error;
};

/// Adaptive quadrature ran out of its subdivision budget.
class QuadratureFailure : public Error {
 public:
  using Error::Error;
};

/// A simulated or transformed state became NaN or infinite.
class NonFiniteState : public Error {
 public:
  using Error::Error;
};

/// Skew parameter outside the open interval (-1, 1).
class InvalidSkew : public Error {
 public:
  using Error::Error;
};

/// Local-time window narrower than the one-step displacement scale.
class BandwidthTooSmall : public Error {
 public:
  using Error::Error;
};

/// Time step too coarse to resolve an eps-scale drift layer.
class StepTooCoarse : public Error {
 public:
  using Error::Error;
};

/// Input data violates a structural or class-membership constraint.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace skewlab
