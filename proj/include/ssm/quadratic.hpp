#pragma once

#include <optional>

#include "ssm/linalg.hpp"
#include "ssm/manifold.hpp"

namespace ssm {

/// Smallest r eigenpairs of A (on the complement of the problem's deflation
/// basis, if any) and the next eigenvalue.
struct GroundSpectrum {
  Vector d;        // d_1 <= ... <= d_r
  double d_next{}; // d_{r+1}
  Matrix Vg;       // n x r, orthonormal

  Index r() const { return d.size(); }
  double d_1() const { return d(0); }
  double d_r() const { return d(d.size() - 1); }
};

struct GroundOptions {
  Index dense_limit = 200;  // dense eigensolver at or below this n
  LobpcgOptions lobpcg{};
};

GroundSpectrum compute_ground(const SparseSymOperator& A, Index r, const Matrix& deflation = Matrix(),
                              const GroundOptions& opts = {});

/// min over St(n, r) of 1/2 tr(X^T A X C) - tr(B^T X).
struct QuadraticProblem {
  SparseSymOperator A;
  Matrix B;
  Matrix C;
  GroundSpectrum ground;
  /// Orthonormal directions every iterate must avoid (n x 0 when unused).
  Matrix deflation;

  Index n() const { return A.dim(); }
  Index r() const { return B.cols(); }

  /// Validates shapes, C > 0 and the spectral gap d_{r+1} > d_r; computes the
  /// ground spectrum when not supplied.
  static QuadraticProblem make(SparseSymOperator A, Matrix B, Matrix C,
                               std::optional<GroundSpectrum> ground = std::nullopt,
                               Matrix deflation = Matrix(), const GroundOptions& opts = {});
};

// Objective and derivatives -------------------------------------------------

double objective(const QuadraticProblem& P, const Matrix& X);
Matrix euclidean_grad(const QuadraticProblem& P, const Matrix& X);
TangentVector riemannian_grad(const QuadraticProblem& P, const StiefelPoint& X);
/// (X^T (A X C - B))_sym
Matrix multiplier(const QuadraticProblem& P, const Matrix& X);
/// P_X { A V C - V Lambda_sym }
TangentVector hessian_apply(const QuadraticProblem& P, const StiefelPoint& X, const Matrix& Lambda,
                            const TangentVector& V);

// Regularization ------------------------------------------------------------

/// A + V_g (d_r I - diag(d)) V_g^T, kept matrix-free.
SparseSymOperator lift(const SparseSymOperator& A, const GroundSpectrum& ground);

/// f with the lifted operator; same B, C, ground and deflation.
QuadraticProblem lifted_problem(const QuadraticProblem& P);

/// Majorizer of f tangent at X_k:
/// f_k(X) = 1/2 <X, A~ X C> - <X, B_k> + 1/2 <X_k, D X_k C>,  B_k = B + D X_k C, D = A~ - A.
struct SurrogateModel {
  StiefelPoint base;
  SparseSymOperator A_tilde;
  Matrix B_k;
  Matrix C;
  double constant{};

  double value(const Matrix& X) const;
  Matrix gradient(const Matrix& X) const;  // A~ X C - B_k
};

SurrogateModel surrogate(const QuadraticProblem& P, const StiefelPoint& X_k);

/// D X for D = A~ - A = V_g diag(d_r - d) V_g^T
Matrix lift_correction_apply(const GroundSpectrum& ground, const Matrix& X);

// Certificates --------------------------------------------------------------

/// Smallest singular value of V_g^T B C^{-1}.
double sigma_nondegeneracy(const GroundSpectrum& ground, const Matrix& B, const Matrix& C);

struct CertificateTolerances {
  double residual = 1e-8;
  double eig_rel = 1e-10;
};

struct QualifiedCertificate {
  Matrix Lambda;
  Vector gamma;        // eigenvalues of C^{-1/2} Lambda C^{-1/2}, ascending
  double residual{};   // |A X C - B - X Lambda|_F
  double sigma{};
  double d_1{};
  double d_r{};
  bool qualified = false;  // gamma_max <= d_r, residual small
  bool global = false;     // gamma_max <= d_1, residual small
  /// d_r - sigma; every qualified critical point has gamma_j <= this bound.
  double safeguard_bound{};
  /// sigma > d_r - d_1: any qualified point is then a global minimizer.
  bool safe_global = false;
  /// C = I, range(B) inside span(V_g) and X = polar(B): X is a global minimizer.
  bool prop_identity_c = false;

  double gamma_max() const { return gamma.size() ? gamma.maxCoeff() : 0.0; }
};

QualifiedCertificate qualified_certificate(const QuadraticProblem& P, const StiefelPoint& X,
                                           const CertificateTolerances& tol = {});

/// C^{1/2} U diag(min(gamma_i, d_r - sigma)) U^T C^{1/2}. Throws DegenerateInstance for sigma <= 0.
Matrix safeguard(const Matrix& Lambda, const Matrix& C, double d_r, double sigma);

/// Eigenvalues of C^{-1/2} Lambda C^{-1/2}.
Vector gamma_spectrum(const Matrix& Lambda, const Matrix& C);

/// 1/2 tr(C) d_r - |B|_*, a lower bound of the lifted objective on St(n, r).
double lower_bound(const QuadraticProblem& P);

/// Global solution V_g U + (A~ - d_1 I)^+ B C^{-1} of a lifted problem with
/// V_g^T B C^{-1} = 0, where U = U_choice (I - W^T W)^{1/2}. Throws
/// DegenerateInstance when V_g^T B C^{-1} != 0 or |(A~ - d_1 I)^+ B C^{-1}|_2 > 1.
StiefelPoint degenerate_solution(const SparseSymOperator& A_tilde, const GroundSpectrum& ground,
                                 const Matrix& B, const Matrix& C, const Matrix& U_choice,
                                 double tol = 1e-10);

/// d_min(X_perp^T A X_perp) - max gamma_i at a critical point. Nonnegative is
/// necessary (not sufficient) for local minimality. Throws NotCritical.
double second_order_margin(const QuadraticProblem& P, const StiefelPoint& X, const Matrix& X_perp,
                           double tol = 1e-8);

}  // namespace ssm
