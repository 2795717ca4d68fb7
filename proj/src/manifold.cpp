#include "ssm/manifold.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include "ssm/errors.hpp"

namespace ssm {

StiefelPoint StiefelPoint::checked(Matrix X, double tol) {
  if (X.rows() < X.cols()) throw InvalidArgument("Stiefel point needs n >= r");
  StiefelPoint p(std::move(X));
  if (p.feasibility_error() > tol) throw InvalidArgument("columns are not orthonormal");
  return p;
}

double StiefelPoint::feasibility_error() const {
  if (X_.cols() == 0) return 0.0;
  return (X_.transpose() * X_ - Matrix::Identity(X_.cols(), X_.cols())).cwiseAbs().maxCoeff();
}

StiefelPoint polar_project(const Matrix& Y) {
  if (Y.rows() < Y.cols()) throw InvalidArgument("polar_project needs n >= r");
  if (Y.cols() == 0) return StiefelPoint::unchecked(Y);
  Eigen::JacobiSVD<Matrix> svd(Y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  if (!(s(s.size() - 1) > 1e-12 * s(0))) throw RankDeficiency("polar_project: input is rank deficient");
  return StiefelPoint::unchecked(svd.matrixU() * svd.matrixV().transpose());
}

TangentVector tangent_project(const StiefelPoint& X, const Matrix& U) {
  const Matrix& x = X.matrix();
  if (U.rows() != x.rows() || U.cols() != x.cols()) throw InvalidArgument("tangent_project: shape mismatch");
  return {U - x * sym(x.transpose() * U)};
}

StiefelPoint retract(const StiefelPoint& X, const TangentVector& V, double t) {
  if (t == 0.0) return X;
  return polar_project(X.matrix() + t * V.dir);
}

StiefelPoint random_point(Index n, Index r, std::uint64_t seed) {
  if (n < r) throw InvalidArgument("random_point needs n >= r");
  Matrix Q = thin_qr(gaussian_matrix(n, r, seed));
  if (Q.cols() < r) throw RankDeficiency("random_point: degenerate Gaussian draw");
  return StiefelPoint::unchecked(std::move(Q));
}

StiefelPoint test_curve(const StiefelPoint& X, const Matrix& X_perp, const Matrix& D0,
                        const Matrix& D1, double t) {
  const Index n = X.n();
  const Index r = X.r();
  if (X_perp.rows() != n || X_perp.cols() != n - r || D0.rows() != r || D0.cols() != r ||
      D1.rows() != n - r || D1.cols() != r)
    throw InvalidArgument("test_curve: shape mismatch");
  if (n > 64) throw InvalidArgument("test_curve is a dense helper for n <= 64");
  Matrix frame(n, n);
  frame << X.matrix(), X_perp;
  Matrix omega = Matrix::Zero(n, n);
  omega.topLeftCorner(r, r) = D0;
  omega.bottomLeftCorner(n - r, r) = D1;
  omega.topRightCorner(r, n - r) = -D1.transpose();
  const Matrix E = (t * omega).exp();
  return StiefelPoint::unchecked(frame * E.leftCols(r));
}

Matrix orthogonal_complement(const StiefelPoint& X) {
  const Index n = X.n();
  Eigen::HouseholderQR<Matrix> qr(X.matrix());
  const Matrix Q = qr.householderQ() * Matrix::Identity(n, n);
  return Q.rightCols(n - X.r());
}

double skew_defect(const StiefelPoint& X, const Matrix& V) {
  const Matrix G = X.matrix().transpose() * V;
  return sym(G).cwiseAbs().maxCoeff();
}

}  // namespace ssm
