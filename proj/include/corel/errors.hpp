#pragma once

#include <stdexcept>
#include <string>

namespace corel {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad shapes, out-of-range parameters, malformed inputs.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A linear system (or closed loop) whose spectral radius is not below one.
class InstabilityError : public Error {
 public:
  InstabilityError(const std::string& what, double radius)
      : Error(what), radius_(radius) {}
  double radius() const noexcept { return radius_; }

 private:
  double radius_;
};

/// An iterative solver ran out of iterations.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// The cost observability Gram matrix is numerically singular.
class ObservabilityError : public Error {
 public:
  using Error::Error;
};

/// Too few samples to form the requested dataset.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Certainty-equivalent planning failed on a learned latent model.
class PlanningError : public Error {
 public:
  using Error::Error;
};

}  // namespace corel
