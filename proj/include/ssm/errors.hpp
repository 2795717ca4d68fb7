#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ssm {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SymmetryViolation : public Error {
 public:
  using Error::Error;
};

/// An iterative method hit its iteration cap. Carries the best residual seen.
class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& what, double best_residual)
      : Error(what), best_residual_(best_residual) {}
  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

/// CG stopped early; `partial` holds the best iterate so callers can decide to use or drop it.
class CgFailure : public ConvergenceFailure {
 public:
  CgFailure(const std::string& what, double best_residual, Eigen::MatrixXd partial)
      : ConvergenceFailure(what, best_residual), partial_(std::move(partial)) {}
  const Eigen::MatrixXd& partial() const noexcept { return partial_; }

 private:
  Eigen::MatrixXd partial_;
};

/// Negative curvature <p, op(p)> < -tol met in CG, or an indefinite Hessian.
class IndefiniteOperator : public Error {
 public:
  using Error::Error;
};

class RankDeficiency : public Error {
 public:
  using Error::Error;
};

/// sigma <= 0, r' = 0, or a degenerate-case precondition that does not hold.
class DegenerateInstance : public Error {
 public:
  using Error::Error;
};

class NotCritical : public Error {
 public:
  using Error::Error;
};

class CardinalityError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file or stream (Matrix Market, CSV, IDX, problem file).
class FormatError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace ssm
