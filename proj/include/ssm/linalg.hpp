#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ssm/kernels.hpp"

namespace ssm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using Csr = kernels::Csr;
using Triplet = Eigen::Triplet<double>;

/// Symmetric n x n operator: a CSR matrix plus an optional low-rank term U M U^T
/// (M symmetric). Immutable; copies share the sparse storage.
class SparseSymOperator {
 public:
  SparseSymOperator() = default;

  /// Throws SymmetryViolation unless |S - S^T|_F <= 1e-12 |S|_F, FormatError on non-finite values.
  explicit SparseSymOperator(Csr sparse);

  /// Builds from (row, col, value) entries. With `mirror`, every off-diagonal entry
  /// (i, j) also sets (j, i) (input is one triangle, as in Matrix Market "symmetric").
  static SparseSymOperator from_triplets(Index n, const std::vector<Triplet>& entries, bool mirror);

  static SparseSymOperator from_dense(const Matrix& M);

  /// Returns this + U core U^T; corrections accumulate.
  SparseSymOperator with_correction(const Matrix& U, const Matrix& core) const;

  Index dim() const { return sparse_ ? sparse_->rows() : 0; }
  Matrix apply(const Matrix& X) const;
  Vector diagonal() const;
  Matrix to_dense() const;

  /// Upper bound on the spectral norm (row-sum bound of the sparse part plus |M|_2 |U|_2^2).
  double norm_bound() const;

  const Csr& sparse() const { return *sparse_; }
  bool has_correction() const { return U_.cols() > 0; }
  const Matrix& correction_basis() const { return U_; }
  const Matrix& correction_core() const { return M_; }

 private:
  std::shared_ptr<const Csr> sparse_;
  Matrix U_;
  Matrix M_;
};

struct EigPairs {
  Vector values;    // ascending
  Matrix vectors;   // orthonormal columns
  Vector residuals; // |M v - lambda v| per pair; empty for the dense path
  int iterations = 0;
};

/// Full spectrum of a dense symmetric matrix, ascending.
EigPairs dense_sym_eig(const Matrix& M);

struct LobpcgOptions {
  double tol = 1e-10;  // relative to norm_bound()
  int max_iter = 3000;
  std::uint64_t seed = 0;
  bool jacobi = true;
};

/// k smallest eigenpairs of A restricted to the orthogonal complement of `deflate`
/// (orthonormal columns, may be empty). LOBPCG with block size k.
EigPairs smallest_eigenpairs(const SparseSymOperator& A, Index k, const Matrix& deflate = Matrix(),
                             const LobpcgOptions& opts = {});

using BlockOperator = std::function<Matrix(const Matrix&)>;

struct CgOptions {
  double tol = 1e-10;
  int max_iter = 1000;
  int restart = 50;
};

struct CgResult {
  Matrix solution;
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> restart_residuals;
};

/// Conjugate gradient on matrices with the Frobenius inner product.
/// Stops at |op(Z) - rhs| <= tol * max(1, |rhs|). Throws IndefiniteOperator on
/// <p, op(p)> < -tol |p|^2 and CgFailure (with the best iterate) at the cap.
CgResult cg_solve(const BlockOperator& op, const Matrix& rhs, const CgOptions& opts = {});

/// Orthonormal basis of range(M) by Gram-Schmidt with reorthogonalization.
/// Columns whose remainder falls below drop_tol * (largest column norm of M) are dropped.
Matrix thin_qr(const Matrix& M, double drop_tol = 1e-10);

double nuclear_norm(const Matrix& M);

inline Matrix sym(const Matrix& M) { return 0.5 * (M + M.transpose()); }

inline double inner(const Matrix& A, const Matrix& B) { return (A.array() * B.array()).sum(); }

/// C^{1/2} and C^{-1/2} of a symmetric positive definite matrix.
struct SpdRoots {
  Matrix sqrt;
  Matrix inv_sqrt;
};
SpdRoots spd_roots(const Matrix& C);

/// Smallest eigenvalue of a small dense symmetric matrix.
double min_eig(const Matrix& M);
double max_eig(const Matrix& M);

/// Seeded standard-normal matrix.
Matrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed);

}  // namespace ssm
