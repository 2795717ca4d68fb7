#include "ssm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "ssm/errors.hpp"

namespace ssm {

namespace {

double spectral_norm(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues()(0);
}

void check_finite(const Csr& S) {
  const double* v = S.valuePtr();
  for (Index p = 0; p < S.nonZeros(); ++p)
    if (!std::isfinite(v[p])) throw FormatError("operator has non-finite entries");
}

}  // namespace

// ---------------------------------------------------------------------------
// SparseSymOperator

SparseSymOperator::SparseSymOperator(Csr sparse) {
  if (sparse.rows() != sparse.cols()) throw InvalidArgument("operator must be square");
  sparse.makeCompressed();
  check_finite(sparse);
  const Csr transposed = Csr(sparse.transpose());
  const double asym = Csr(sparse - transposed).norm();
  if (asym > 1e-12 * sparse.norm())
    throw SymmetryViolation("sparse operator is not symmetric (|S - S^T|_F = " +
                            std::to_string(asym) + ")");
  sparse_ = std::make_shared<const Csr>(std::move(sparse));
}

SparseSymOperator SparseSymOperator::from_triplets(Index n, const std::vector<Triplet>& entries,
                                                   bool mirror) {
  std::vector<Triplet> all;
  all.reserve(entries.size() * (mirror ? 2 : 1));
  for (const auto& t : entries) {
    if (t.row() < 0 || t.row() >= n || t.col() < 0 || t.col() >= n)
      throw FormatError("entry index out of range");
    all.push_back(t);
    if (mirror && t.row() != t.col()) all.emplace_back(t.col(), t.row(), t.value());
  }
  Csr S(n, n);
  S.setFromTriplets(all.begin(), all.end());
  return SparseSymOperator(std::move(S));
}

SparseSymOperator SparseSymOperator::from_dense(const Matrix& M) {
  if (M.rows() != M.cols()) throw InvalidArgument("operator must be square");
  Csr S = M.sparseView();
  return SparseSymOperator(std::move(S));
}

SparseSymOperator SparseSymOperator::with_correction(const Matrix& U, const Matrix& core) const {
  if (U.rows() != dim() || core.rows() != U.cols() || core.cols() != U.cols())
    throw InvalidArgument("correction shape mismatch");
  if ((core - core.transpose()).norm() > 1e-12 * std::max(1.0, core.norm()))
    throw SymmetryViolation("correction core is not symmetric");
  SparseSymOperator out = *this;
  const Index k0 = U_.cols();
  const Index k1 = U.cols();
  out.U_.resize(dim(), k0 + k1);
  out.M_ = Matrix::Zero(k0 + k1, k0 + k1);
  if (k0 > 0) {
    out.U_.leftCols(k0) = U_;
    out.M_.topLeftCorner(k0, k0) = M_;
  }
  out.U_.rightCols(k1) = U;
  out.M_.bottomRightCorner(k1, k1) = sym(core);
  return out;
}

Matrix SparseSymOperator::apply(const Matrix& X) const {
  if (X.rows() != dim()) throw InvalidArgument("operator/block dimension mismatch");
  Matrix Y;
  kernels::csr_times_block(*sparse_, X, Y);
  if (has_correction()) Y.noalias() += U_ * (M_ * (U_.transpose() * X));
  return Y;
}

Vector SparseSymOperator::diagonal() const {
  Vector d = Vector(sparse_->diagonal());
  if (has_correction()) d += ((U_ * M_).array() * U_.array()).rowwise().sum().matrix();
  return d;
}

Matrix SparseSymOperator::to_dense() const {
  Matrix D = Matrix(*sparse_);
  if (has_correction()) D.noalias() += U_ * M_ * U_.transpose();
  return D;
}

double SparseSymOperator::norm_bound() const {
  double row_max = 0.0;
  const auto& S = *sparse_;
  for (Index i = 0; i < S.rows(); ++i) {
    double s = 0.0;
    for (Csr::InnerIterator it(S, i); it; ++it) s += std::abs(it.value());
    row_max = std::max(row_max, s);
  }
  if (!has_correction()) return row_max;
  const double u = spectral_norm(U_);
  return row_max + spectral_norm(M_) * u * u;
}

// ---------------------------------------------------------------------------
// Dense helpers

EigPairs dense_sym_eig(const Matrix& M) {
  if (M.rows() != M.cols()) throw InvalidArgument("dense_sym_eig needs a square matrix");
  const double asym = (M - M.transpose()).norm();
  if (asym > 1e-12 * M.norm())
    throw SymmetryViolation("matrix is not symmetric (|M - M^T|_F = " + std::to_string(asym) + ")");
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(M));
  if (es.info() != Eigen::Success) throw ConvergenceFailure("dense eigensolver failed", 0.0);
  EigPairs out;
  out.values = es.eigenvalues();
  out.vectors = es.eigenvectors();
  return out;
}

SpdRoots spd_roots(const Matrix& C) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(C));
  const Vector& w = es.eigenvalues();
  if (w.size() == 0 || w.minCoeff() <= 0.0)
    throw InvalidArgument("matrix is not positive definite");
  const Matrix& V = es.eigenvectors();
  SpdRoots out;
  out.sqrt = V * w.cwiseSqrt().asDiagonal() * V.transpose();
  out.inv_sqrt = V * w.cwiseSqrt().cwiseInverse().asDiagonal() * V.transpose();
  return out;
}

double min_eig(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(M), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double max_eig(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(M), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(M.rows() - 1);
}

Matrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix G(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) G(i, j) = normal(gen);
  return G;
}

Matrix thin_qr(const Matrix& M, double drop_tol) {
  const Index n = M.rows();
  double max_norm = 0.0;
  for (Index j = 0; j < M.cols(); ++j) max_norm = std::max(max_norm, M.col(j).norm());
  Matrix Q(n, std::min(n, M.cols()));
  Index count = 0;
  if (max_norm == 0.0) return Matrix(n, 0);
  const double threshold = drop_tol * max_norm;
  for (Index j = 0; j < M.cols() && count < n; ++j) {
    Vector v = M.col(j);
    double norm = v.norm();
    // Reorthogonalize until a pass no longer removes more than half the norm.
    for (int pass = 0; pass < 4 && count > 0; ++pass) {
      const auto Qc = Q.leftCols(count);
      v -= Qc * (Qc.transpose() * v);
      const double next = v.norm();
      const bool settled = next >= 0.5 * norm;
      norm = next;
      if (settled || norm <= threshold) break;
    }
    if (norm <= threshold) continue;
    Q.col(count++) = v / norm;
  }
  return Q.leftCols(count);
}

double nuclear_norm(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues().sum();
}

// ---------------------------------------------------------------------------
// LOBPCG

namespace {

void project_out(const Matrix& D, Matrix& X) {
  if (D.cols() > 0 && X.cols() > 0) X -= D * (D.transpose() * X);
}

}  // namespace

EigPairs smallest_eigenpairs(const SparseSymOperator& A, Index k, const Matrix& deflate,
                             const LobpcgOptions& opts) {
  const Index n = A.dim();
  if (k <= 0 || k >= n) throw InvalidArgument("smallest_eigenpairs needs 0 < k < n");
  if (deflate.cols() > 0) {
    if (deflate.rows() != n) throw InvalidArgument("deflation basis has wrong row count");
    if (k > n - deflate.cols()) throw InvalidArgument("k exceeds the deflated dimension");
    const double orth =
        (deflate.transpose() * deflate - Matrix::Identity(deflate.cols(), deflate.cols())).norm();
    if (orth > 1e-10) throw InvalidArgument("deflation basis is not orthonormal");
  }

  Vector precond;
  if (opts.jacobi) {
    const Vector d = A.diagonal();
    if (d.minCoeff() > 0.0) precond = d.cwiseMax(1e-12).cwiseInverse();
  }

  const double scale = std::max(A.norm_bound(), std::numeric_limits<double>::min());
  const double target = opts.tol * scale;

  Matrix X = gaussian_matrix(n, k, opts.seed);
  project_out(deflate, X);
  X = thin_qr(X);
  if (X.cols() < k) throw ConvergenceFailure("could not build a starting block", 0.0);

  // Initial Rayleigh-Ritz.
  Matrix AX = A.apply(X);
  {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym(X.transpose() * AX));
    X = X * es.eigenvectors();
    AX = AX * es.eigenvectors();
  }
  Vector lambda = (X.transpose() * AX).diagonal();
  Matrix P(n, 0);
  double best = std::numeric_limits<double>::infinity();

  EigPairs out;
  for (int it = 0; it <= opts.max_iter; ++it) {
    Matrix R = AX - X * lambda.asDiagonal();
    project_out(deflate, R);
    Vector res(k);
    std::vector<Index> active;
    for (Index i = 0; i < k; ++i) {
      res(i) = R.col(i).norm();
      if (res(i) > target) active.push_back(i);
    }
    best = std::min(best, res.maxCoeff());
    out.iterations = it;
    if (active.empty()) {
      out.values = lambda;
      out.vectors = X;
      out.residuals = res;
      return out;
    }
    if (it == opts.max_iter) break;

    const Index na = static_cast<Index>(active.size());
    Matrix W(n, na);
    for (Index a = 0; a < na; ++a) {
      W.col(a) = R.col(active[static_cast<std::size_t>(a)]);
      if (precond.size() > 0) W.col(a).array() *= precond.array();
    }
    project_out(deflate, W);
    Matrix Pa(n, 0);
    if (P.cols() == k) {
      Pa.resize(n, na);
      for (Index a = 0; a < na; ++a) Pa.col(a) = P.col(active[static_cast<std::size_t>(a)]);
      project_out(deflate, Pa);
    }
    for (Matrix* blk : {&W, &Pa})
      for (Index j = 0; j < blk->cols(); ++j) {
        const double nj = blk->col(j).norm();
        if (nj > 0.0) blk->col(j) /= nj;
      }

    Matrix stacked(n, k + W.cols() + Pa.cols());
    stacked << X, W, Pa;
    const Matrix S = thin_qr(stacked);
    if (S.cols() <= k) break;  // no new directions: stagnation
    const Matrix AS = A.apply(S);
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym(S.transpose() * AS));
    const Matrix coef = es.eigenvectors().leftCols(k);
    Matrix Xn = S * coef;
    AX = AS * coef;
    lambda = es.eigenvalues().head(k);
    P = Xn - X * (X.transpose() * Xn);
    X = std::move(Xn);
  }
  throw ConvergenceFailure("LOBPCG did not converge (best max residual " + std::to_string(best) + ")",
                           best);
}

// ---------------------------------------------------------------------------
// Conjugate gradient

CgResult cg_solve(const BlockOperator& op, const Matrix& rhs, const CgOptions& opts) {
  const double rhs_norm = rhs.norm();
  const double target = opts.tol * std::max(1.0, rhs_norm);
  CgResult out;
  Matrix x = Matrix::Zero(rhs.rows(), rhs.cols());
  Matrix r = rhs;
  double rr = r.squaredNorm();
  Matrix anchor = x;
  double anchor_res = std::sqrt(rr);
  out.restart_residuals.push_back(anchor_res);
  if (anchor_res <= target) {
    out.solution = x;
    out.residual = anchor_res;
    return out;
  }
  Matrix p = r;
  int since_restart = 0;
  for (int it = 1; it <= opts.max_iter; ++it) {
    const Matrix Ap = op(p);
    const double pAp = inner(p, Ap);
    const double pp = p.squaredNorm();
    out.iterations = it;
    if (pAp < -opts.tol * pp)
      throw IndefiniteOperator("negative curvature in CG (<p, op p>/|p|^2 = " +
                               std::to_string(pAp / pp) + ")");
    bool restart = false;
    if (pAp <= 0.0) {
      restart = true;  // breakdown; fall back to the anchor
    } else {
      const double alpha = rr / pAp;
      x.noalias() += alpha * p;
      r.noalias() -= alpha * Ap;
      const double rr_new = r.squaredNorm();
      const double beta = rr_new / rr;
      rr = rr_new;
      p = r + beta * p;
      if (std::sqrt(rr) <= target) restart = true;
    }
    if (++since_restart >= opts.restart) restart = true;
    if (!restart) continue;

    // Re-anchor on the true residual; the anchor residual never increases.
    Matrix true_r = rhs - op(x);
    const double true_res = true_r.norm();
    if (true_res < anchor_res) {
      anchor = x;
      anchor_res = true_res;
      r = std::move(true_r);
    } else {
      x = anchor;
      r = rhs - op(x);
    }
    out.restart_residuals.push_back(anchor_res);
    if (anchor_res <= target) {
      out.solution = anchor;
      out.residual = anchor_res;
      return out;
    }
    if (pAp <= 0.0 && true_res >= anchor_res && since_restart == 1) break;
    rr = r.squaredNorm();
    p = r;
    since_restart = 0;
  }
  throw CgFailure("CG reached its iteration cap (residual " + std::to_string(anchor_res) + ")",
                  anchor_res, anchor);
}

}  // namespace ssm
