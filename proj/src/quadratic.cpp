#include "ssm/quadratic.hpp"

#include <cmath>
#include <limits>

#include "ssm/errors.hpp"

namespace ssm {

namespace {

Matrix complement_basis(const Matrix& D, Index n) {
  if (D.cols() == 0) return Matrix::Identity(n, n);
  Eigen::HouseholderQR<Matrix> qr(D);
  const Matrix Q = qr.householderQ() * Matrix::Identity(n, n);
  return Q.rightCols(n - D.cols());
}

/// B C^{-1} for symmetric positive definite C.
Matrix right_solve_spd(const Matrix& B, const Matrix& C) {
  Eigen::LLT<Matrix> llt(C);
  if (llt.info() != Eigen::Success) throw InvalidArgument("C is not positive definite");
  return llt.solve(B.transpose()).transpose();
}

}  // namespace

GroundSpectrum compute_ground(const SparseSymOperator& A, Index r, const Matrix& deflation,
                              const GroundOptions& opts) {
  const Index n = A.dim();
  const Index free_dim = n - deflation.cols();
  if (r <= 0 || r > free_dim) throw InvalidArgument("compute_ground: r out of range");
  GroundSpectrum g;
  if (n <= opts.dense_limit || r + 1 > free_dim) {
    const Matrix Q = complement_basis(deflation, n);
    const Matrix M = Q.transpose() * A.apply(Q);
    const EigPairs eig = dense_sym_eig(sym(M));
    g.d = eig.values.head(r);
    g.Vg = Q * eig.vectors.leftCols(r);
    g.d_next = (r < free_dim) ? eig.values(r) : std::numeric_limits<double>::infinity();
    return g;
  }
  const EigPairs eig = smallest_eigenpairs(A, r + 1, deflation, opts.lobpcg);
  g.d = eig.values.head(r);
  g.Vg = eig.vectors.leftCols(r);
  g.d_next = eig.values(r);
  return g;
}

QuadraticProblem QuadraticProblem::make(SparseSymOperator A, Matrix B, Matrix C,
                                        std::optional<GroundSpectrum> ground, Matrix deflation,
                                        const GroundOptions& opts) {
  const Index n = A.dim();
  const Index r = B.cols();
  if (B.rows() != n) throw InvalidArgument("B must have n rows");
  if (r == 0 || r > n) throw InvalidArgument("B must have 1 <= r <= n columns");
  if (C.rows() != r || C.cols() != r) throw InvalidArgument("C must be r x r");
  if ((C - C.transpose()).norm() > 1e-12 * std::max(1.0, C.norm()))
    throw SymmetryViolation("C is not symmetric");
  if (min_eig(C) <= 0.0) throw InvalidArgument("C is not positive definite");
  if (deflation.size() == 0) deflation.resize(n, 0);
  if (deflation.rows() != n) throw InvalidArgument("deflation basis has wrong row count");
  if (deflation.cols() > 0 &&
      (deflation.transpose() * deflation - Matrix::Identity(deflation.cols(), deflation.cols()))
              .norm() > 1e-10)
    throw InvalidArgument("deflation basis is not orthonormal");

  QuadraticProblem P;
  P.A = std::move(A);
  P.B = std::move(B);
  P.C = sym(C);
  P.deflation = std::move(deflation);
  P.ground = ground ? std::move(*ground) : compute_ground(P.A, r, P.deflation, opts);
  const GroundSpectrum& g = P.ground;
  if (g.d.size() != r || g.Vg.rows() != n || g.Vg.cols() != r)
    throw InvalidArgument("ground spectrum has the wrong shape");
  if (!(g.d_next - g.d_r() > 1e-12 * std::max(1.0, std::abs(g.d_r()))))
    throw InvalidArgument("no spectral gap: d_{r+1} must exceed d_r");
  return P;
}

// ---------------------------------------------------------------------------

double objective(const QuadraticProblem& P, const Matrix& X) {
  return 0.5 * inner(X, P.A.apply(X) * P.C) - inner(P.B, X);
}

Matrix euclidean_grad(const QuadraticProblem& P, const Matrix& X) {
  return P.A.apply(X) * P.C - P.B;
}

TangentVector riemannian_grad(const QuadraticProblem& P, const StiefelPoint& X) {
  return tangent_project(X, euclidean_grad(P, X.matrix()));
}

Matrix multiplier(const QuadraticProblem& P, const Matrix& X) {
  return sym(X.transpose() * euclidean_grad(P, X));
}

TangentVector hessian_apply(const QuadraticProblem& P, const StiefelPoint& X, const Matrix& Lambda,
                            const TangentVector& V) {
  return tangent_project(X, P.A.apply(V.dir) * P.C - V.dir * sym(Lambda));
}

// ---------------------------------------------------------------------------

SparseSymOperator lift(const SparseSymOperator& A, const GroundSpectrum& ground) {
  const Vector shift = (Vector::Constant(ground.r(), ground.d_r()) - ground.d);
  if (shift.cwiseAbs().maxCoeff() == 0.0) return A;
  return A.with_correction(ground.Vg, shift.asDiagonal().toDenseMatrix());
}

QuadraticProblem lifted_problem(const QuadraticProblem& P) {
  QuadraticProblem L = P;
  L.A = lift(P.A, P.ground);
  L.ground.d = Vector::Constant(P.ground.r(), P.ground.d_r());
  return L;
}

Matrix lift_correction_apply(const GroundSpectrum& ground, const Matrix& X) {
  const Vector shift = Vector::Constant(ground.r(), ground.d_r()) - ground.d;
  return ground.Vg * (shift.asDiagonal() * (ground.Vg.transpose() * X));
}

double SurrogateModel::value(const Matrix& X) const {
  return 0.5 * inner(X, A_tilde.apply(X) * C) - inner(X, B_k) + constant;
}

Matrix SurrogateModel::gradient(const Matrix& X) const { return A_tilde.apply(X) * C - B_k; }

SurrogateModel surrogate(const QuadraticProblem& P, const StiefelPoint& X_k) {
  SurrogateModel m;
  m.base = X_k;
  m.A_tilde = lift(P.A, P.ground);
  m.C = P.C;
  const Matrix DX = lift_correction_apply(P.ground, X_k.matrix());
  m.B_k = P.B + DX * P.C;
  m.constant = 0.5 * inner(X_k.matrix(), DX * P.C);
  return m;
}

// ---------------------------------------------------------------------------

double sigma_nondegeneracy(const GroundSpectrum& ground, const Matrix& B, const Matrix& C) {
  const Matrix M = ground.Vg.transpose() * right_solve_spd(B, C);
  Eigen::JacobiSVD<Matrix> svd(M);
  const Vector& s = svd.singularValues();
  return s.size() ? s(s.size() - 1) : 0.0;
}

Vector gamma_spectrum(const Matrix& Lambda, const Matrix& C) {
  const SpdRoots roots = spd_roots(C);
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(roots.inv_sqrt * Lambda * roots.inv_sqrt),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

QualifiedCertificate qualified_certificate(const QuadraticProblem& P, const StiefelPoint& X,
                                           const CertificateTolerances& tol) {
  QualifiedCertificate c;
  const Matrix& x = X.matrix();
  const Matrix G = euclidean_grad(P, x);
  c.Lambda = sym(x.transpose() * G);
  c.residual = (G - x * c.Lambda).norm();
  c.gamma = gamma_spectrum(c.Lambda, P.C);
  c.sigma = sigma_nondegeneracy(P.ground, P.B, P.C);
  c.d_1 = P.ground.d_1();
  c.d_r = P.ground.d_r();
  const double slack_r = tol.eig_rel * std::max(1.0, std::abs(c.d_r));
  const double slack_1 = tol.eig_rel * std::max(1.0, std::abs(c.d_1));
  const bool stationary = c.residual <= tol.residual;
  c.qualified = stationary && c.gamma_max() <= c.d_r + slack_r;
  c.global = stationary && c.gamma_max() <= c.d_1 + slack_1;
  c.safeguard_bound = c.d_r - c.sigma;
  c.safe_global = c.qualified && c.sigma > c.d_r - c.d_1;

  const Index r = P.r();
  const bool identity_c = (P.C - Matrix::Identity(r, r)).norm() <= 1e-12;
  const Matrix& Vg = P.ground.Vg;
  const double outside = (P.B - Vg * (Vg.transpose() * P.B)).norm();
  if (identity_c && stationary && outside <= 1e-10 * std::max(1.0, P.B.norm())) {
    try {
      const StiefelPoint polar = polar_project(P.B);
      c.prop_identity_c = (polar.matrix() - x).norm() <= 1e-8;
    } catch (const RankDeficiency&) {
      c.prop_identity_c = false;
    }
  }
  return c;
}

Matrix safeguard(const Matrix& Lambda, const Matrix& C, double d_r, double sigma) {
  if (!(sigma > 0.0)) throw DegenerateInstance("safeguard needs sigma > 0");
  const SpdRoots roots = spd_roots(C);
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(roots.inv_sqrt * Lambda * roots.inv_sqrt));
  const Vector clamped = es.eigenvalues().cwiseMin(d_r - sigma);
  const Matrix& U = es.eigenvectors();
  return sym(roots.sqrt * U * clamped.asDiagonal() * U.transpose() * roots.sqrt);
}

double lower_bound(const QuadraticProblem& P) {
  return 0.5 * P.C.trace() * P.ground.d_r() - nuclear_norm(P.B);
}

StiefelPoint degenerate_solution(const SparseSymOperator& A_tilde, const GroundSpectrum& ground,
                                 const Matrix& B, const Matrix& C, const Matrix& U_choice,
                                 double tol) {
  const Index r = B.cols();
  const Matrix& Vg = ground.Vg;
  if (U_choice.rows() != r || U_choice.cols() != r ||
      (U_choice.transpose() * U_choice - Matrix::Identity(r, r)).norm() > 1e-10)
    throw InvalidArgument("U_choice must be an r x r orthogonal matrix");
  const Matrix BC = right_solve_spd(B, C);
  if ((Vg.transpose() * BC).norm() > tol * std::max(1.0, BC.norm()))
    throw DegenerateInstance("V_g^T B C^{-1} is nonzero: instance is not degenerate");

  const double d1 = ground.d_1();
  auto project = [&](Matrix Z) {
    Z -= Vg * (Vg.transpose() * Z);
    return Z;
  };
  const BlockOperator op = [&](const Matrix& Z) {
    const Matrix PZ = project(Z);
    return project(A_tilde.apply(PZ) - d1 * PZ);
  };
  CgOptions cg;
  cg.tol = 1e-13;
  cg.max_iter = static_cast<int>(10 * A_tilde.dim() + 100);
  const Matrix W = cg_solve(op, project(BC), cg).solution;

  Eigen::JacobiSVD<Matrix> svd(W);
  const double w2 = svd.singularValues()(0);
  if (w2 > 1.0 + tol) throw DegenerateInstance("|(A~ - d_1 I)^+ B C^{-1}|_2 exceeds 1");

  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(Matrix::Identity(r, r) - W.transpose() * W));
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Matrix S = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
  return StiefelPoint::unchecked(Vg * (U_choice * S) + W);
}

double second_order_margin(const QuadraticProblem& P, const StiefelPoint& X, const Matrix& X_perp,
                           double tol) {
  const QualifiedCertificate cert = qualified_certificate(P, X, {tol, 1e-10});
  if (cert.residual > tol) throw NotCritical("second_order_margin needs a critical point");
  const Matrix M = X_perp.transpose() * P.A.apply(X_perp);
  return min_eig(sym(M)) - cert.gamma_max();
}

}  // namespace ssm
