#pragma once

#include <cstdint>

#include "ssm/linalg.hpp"

namespace ssm {

/// An n x r matrix with orthonormal columns.
class StiefelPoint {
 public:
  StiefelPoint() = default;

  /// Throws InvalidArgument unless n >= r and |X^T X - I| <= tol (max entry).
  static StiefelPoint checked(Matrix X, double tol = 1e-10);
  /// Caller vouches for orthonormality (results of polar_project, thin_qr, ...).
  static StiefelPoint unchecked(Matrix X) { return StiefelPoint(std::move(X)); }

  const Matrix& matrix() const { return X_; }
  Index n() const { return X_.rows(); }
  Index r() const { return X_.cols(); }
  /// max |X^T X - I|
  double feasibility_error() const;

 private:
  explicit StiefelPoint(Matrix X) : X_(std::move(X)) {}
  Matrix X_;
};

/// Element of the tangent space at some base point; X^T dir is skew.
struct TangentVector {
  Matrix dir;
};

/// Nearest Stiefel point U V^T of the reduced SVD. Throws RankDeficiency when
/// the smallest singular value is below 1e-12 times the largest.
StiefelPoint polar_project(const Matrix& Y);

/// U - X (X^T U)_sym
TangentVector tangent_project(const StiefelPoint& X, const Matrix& U);

/// polar_project(X + t V)
StiefelPoint retract(const StiefelPoint& X, const TangentVector& V, double t = 1.0);

/// Orthonormalized seeded Gaussian matrix.
StiefelPoint random_point(Index n, Index r, std::uint64_t seed);

/// Curve [X, X_perp] exp(t Omega) I_{n,r} with Omega = [[D0, -D1^T], [D1, 0]].
/// Dense matrix exponential; intended for n <= 64.
StiefelPoint test_curve(const StiefelPoint& X, const Matrix& X_perp, const Matrix& D0,
                        const Matrix& D1, double t);

/// Orthonormal basis of range(X)^perp (dense; n x (n - r)).
Matrix orthogonal_complement(const StiefelPoint& X);

/// max |(X^T V) + (X^T V)^T| / 2
double skew_defect(const StiefelPoint& X, const Matrix& V);

}  // namespace ssm
