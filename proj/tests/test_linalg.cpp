#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ssm/errors.hpp"
#include "ssm/kernels.hpp"
#include "ssm/linalg.hpp"

using namespace ssm;

namespace {

Matrix random_sym(Index n, std::uint64_t seed) {
  const Matrix G = gaussian_matrix(n, n, seed);
  return 0.5 * (G + G.transpose());
}

Matrix path_laplacian(Index n) {
  Matrix L = Matrix::Zero(n, n);
  for (Index i = 0; i + 1 < n; ++i) {
    L(i, i) += 1;
    L(i + 1, i + 1) += 1;
    L(i, i + 1) = L(i + 1, i) = -1;
  }
  return L;
}

// Sparse symmetric PSD test matrix: banded random plus diagonal dominance.
SparseSymOperator random_sparse_psd(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Triplet> t;
  Vector rowsum = Vector::Zero(n);
  for (Index i = 0; i < n; ++i)
    for (Index off : {1, 7, 31}) {
      const Index j = (i + off) % n;
      const double v = u(rng);
      t.emplace_back(i, j, v);
      rowsum(i) += std::abs(v);
      rowsum(j) += std::abs(v);
    }
  for (Index i = 0; i < n; ++i) t.emplace_back(i, i, rowsum(i) + 0.01 * (i % 13));
  return SparseSymOperator::from_triplets(n, t, true);
}

}  // namespace

TEST_CASE("dense_sym_eig: diagonal and swap matrices") {
  Matrix D = Vector(Eigen::Vector3d(4, 1, 2)).asDiagonal();
  const EigPairs e = dense_sym_eig(D);
  CHECK(e.values(0) == doctest::Approx(1));
  CHECK(e.values(1) == doctest::Approx(2));
  CHECK(e.values(2) == doctest::Approx(4));

  Matrix S(2, 2);
  S << 0, 1, 1, 0;
  const EigPairs s = dense_sym_eig(S);
  CHECK(s.values(0) == doctest::Approx(-1));
  CHECK(s.values(1) == doctest::Approx(1));
  CHECK(std::abs(s.vectors(0, 0) + s.vectors(1, 0)) < 1e-12);
  CHECK(std::abs(s.vectors(0, 1) - s.vectors(1, 1)) < 1e-12);
}

TEST_CASE("dense_sym_eig: residual and reconstruction on random symmetric") {
  const Matrix M = random_sym(10, 3);
  const EigPairs e = dense_sym_eig(M);
  for (Index i = 0; i < 10; ++i)
    CHECK((M * e.vectors.col(i) - e.values(i) * e.vectors.col(i)).norm() <= 1e-10);
  CHECK((e.vectors * e.values.asDiagonal() * e.vectors.transpose() - M).norm() <= 1e-10 * M.norm());
  for (Index i = 1; i < 10; ++i) CHECK(e.values(i) >= e.values(i - 1));
}

TEST_CASE("dense_sym_eig rejects nonsymmetric input") {
  Matrix M(2, 2);
  M << 1, 2, 0, 1;
  CHECK_THROWS_AS(dense_sym_eig(M), SymmetryViolation);
}

TEST_CASE("SparseSymOperator rejects asymmetric pattern and applies corrections") {
  std::vector<Triplet> t{{0, 1, 1.0}};
  CHECK_THROWS_AS(SparseSymOperator::from_triplets(2, t, false), SymmetryViolation);
  const SparseSymOperator A = SparseSymOperator::from_triplets(2, t, true);
  Matrix U(2, 1);
  U << 1, 1;
  Matrix M(1, 1);
  M << 2.0;
  const SparseSymOperator B = A.with_correction(U, M);
  Matrix expected(2, 2);
  expected << 2, 3, 3, 2;
  CHECK((B.to_dense() - expected).norm() < 1e-14);
  CHECK((B.apply(Matrix::Identity(2, 2)) - expected).norm() < 1e-14);
  CHECK(B.norm_bound() >= 5.0 - 1e-12);
}

TEST_CASE("smallest_eigenpairs: diagonal 1..100") {
  std::vector<Triplet> t;
  for (int i = 0; i < 100; ++i) t.emplace_back(i, i, i + 1.0);
  const SparseSymOperator A = SparseSymOperator::from_triplets(100, t, false);
  const EigPairs e = smallest_eigenpairs(A, 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(e.values(i) == doctest::Approx(i + 1.0).epsilon(1e-10));
    CHECK(std::abs(std::abs(e.vectors(i, i)) - 1.0) < 1e-8);
  }
}

TEST_CASE("smallest_eigenpairs: path Laplacian null vector and deflation") {
  const Index n = 50;
  const SparseSymOperator L = SparseSymOperator::from_dense(path_laplacian(n));
  const EigPairs e = smallest_eigenpairs(L, 1);
  CHECK(std::abs(e.values(0)) < 1e-9);
  CHECK(std::abs(std::abs(e.vectors.col(0).sum()) / std::sqrt(double(n)) - 1.0) < 1e-8);

  const Matrix ones = Matrix::Constant(n, 1, 1.0 / std::sqrt(double(n)));
  const EigPairs d = smallest_eigenpairs(L, 2, ones);
  const EigPairs dense = dense_sym_eig(path_laplacian(n));
  CHECK(d.values(0) == doctest::Approx(dense.values(1)).epsilon(1e-8));
  CHECK(d.values(1) == doctest::Approx(dense.values(2)).epsilon(1e-8));
  CHECK((ones.transpose() * d.vectors).norm() <= 1e-10);
}

TEST_CASE("smallest_eigenpairs: random sparse 500 x 500 against dense") {
  const SparseSymOperator A = random_sparse_psd(500, 11);
  const EigPairs e = smallest_eigenpairs(A, 4);
  const EigPairs ref = dense_sym_eig(A.to_dense());
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(e.values(i) - ref.values(i)) <= 1e-8 * std::abs(ref.values(i)));
  CHECK((e.vectors.transpose() * e.vectors - Matrix::Identity(4, 4)).norm() <= 1e-10);
}

TEST_CASE("smallest_eigenpairs reports non-convergence") {
  const SparseSymOperator A = random_sparse_psd(300, 5);
  LobpcgOptions o;
  o.max_iter = 2;
  o.tol = 1e-14;
  CHECK_THROWS_AS(smallest_eigenpairs(A, 4, Matrix(), o), ConvergenceFailure);
}

TEST_CASE("cg_solve: identity, diagonal, random SPD") {
  const Matrix R = gaussian_matrix(5, 2, 1);
  CHECK((cg_solve([](const Matrix& Z) { return Z; }, R).solution - R).norm() < 1e-12);

  Matrix rhs(2, 1);
  rhs << 2, 2;
  const auto diag = [](const Matrix& Z) {
    Matrix out = Z;
    out.row(1) *= 2.0;
    return out;
  };
  const Matrix z = cg_solve(diag, rhs).solution;
  CHECK(z(0, 0) == doctest::Approx(2));
  CHECK(z(1, 0) == doctest::Approx(1));

  const Matrix G = gaussian_matrix(20, 20, 9);
  const Matrix S = G * G.transpose() + 20.0 * Matrix::Identity(20, 20);
  const Matrix B = gaussian_matrix(20, 3, 10);
  const CgResult res = cg_solve([&](const Matrix& Z) { return Matrix(S * Z); }, B);
  CHECK((res.solution - S.llt().solve(B)).norm() <= 1e-9);
  for (size_t i = 1; i < res.restart_residuals.size(); ++i)
    CHECK(res.restart_residuals[i] <= res.restart_residuals[i - 1]);
}

TEST_CASE("cg_solve: negative curvature and iteration cap") {
  const Matrix rhs = Matrix::Ones(3, 1);
  CHECK_THROWS_AS(cg_solve([](const Matrix& Z) { return Matrix(-Z); }, rhs), IndefiniteOperator);
  const Matrix G = gaussian_matrix(30, 30, 4);
  const Matrix S = G * G.transpose() + 1e-3 * Matrix::Identity(30, 30);
  CgOptions o;
  o.max_iter = 2;
  try {
    cg_solve([&](const Matrix& Z) { return Matrix(S * Z); }, Matrix::Ones(30, 1), o);
    FAIL("expected CgFailure");
  } catch (const CgFailure& e) {
    CHECK(e.partial().rows() == 30);
    CHECK(e.best_residual() > 0);
  }
}

TEST_CASE("thin_qr: orthonormal input, duplicates, projection") {
  const Matrix Q0 = thin_qr(gaussian_matrix(6, 3, 2));
  const Matrix Q1 = thin_qr(Q0);
  CHECK(Q1.cols() == 3);
  CHECK((Q1 * Q1.transpose() - Q0 * Q0.transpose()).norm() < 1e-12);

  Matrix M(3, 3);
  M << 1, 1, 0, 0, 0, 1, 0, 0, 0;
  CHECK(thin_qr(M).cols() == 2);

  const Matrix R = gaussian_matrix(50, 8, 5);
  const Matrix Q = thin_qr(R);
  CHECK((Q.transpose() * Q - Matrix::Identity(8, 8)).norm() <= 1e-12);
  CHECK((Q * Q.transpose() * R - R).norm() <= 1e-10);
  CHECK(thin_qr(Matrix::Zero(4, 2)).cols() == 0);
}

TEST_CASE("nuclear_norm") {
  Matrix B = Matrix::Zero(3, 2);
  B(0, 0) = B(1, 1) = 0.5;
  CHECK(nuclear_norm(B) == doctest::Approx(1.0));
  Vector u(3), v(2);
  u << 2, 0, 0;
  v << 0, 3;
  CHECK(nuclear_norm(u * v.transpose()) == doctest::Approx(6.0));
  const Matrix R = gaussian_matrix(6, 3, 8);
  Eigen::BDCSVD<Matrix> svd(R);
  CHECK(std::abs(nuclear_norm(R) - svd.singularValues().sum()) <= 1e-10);
}

TEST_CASE("parallel kernels agree with the serial reference") {
  const SparseSymOperator A = random_sparse_psd(400, 3);
  const Matrix X = gaussian_matrix(400, 5, 1);
  Matrix Yp(400, 5), Ys(400, 5);
  kernels::csr_times_block(A.sparse(), X, Yp);
  kernels::serial::csr_times_block(A.sparse(), X, Ys);
  CHECK((Yp - Ys).norm() == 0.0);

  const Matrix pts = gaussian_matrix(200, 3, 2);
  const auto a = kernels::knn(pts, 6);
  const auto b = kernels::serial::knn(pts, 6);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < a[i].size(); ++j) {
      CHECK(a[i][j].index == b[i][j].index);
      CHECK(a[i][j].dist2 == b[i][j].dist2);
    }
}
