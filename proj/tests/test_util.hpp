#pragma once

#include <cmath>
#include <random>

#include "ssm/quadratic.hpp"

namespace testutil {

using ssm::Index;
using ssm::Matrix;
using ssm::Vector;

inline ssm::SparseSymOperator diag_op(const std::vector<double>& d) {
  std::vector<ssm::Triplet> t;
  for (size_t i = 0; i < d.size(); ++i) t.emplace_back(i, i, d[i]);
  return ssm::SparseSymOperator::from_triplets(static_cast<Index>(d.size()), t, false);
}

inline Matrix unit_cols(Index n, std::initializer_list<std::pair<Index, double>> cols) {
  Matrix X = Matrix::Zero(n, static_cast<Index>(cols.size()));
  Index j = 0;
  for (auto [i, s] : cols) X(i, j++) = s;
  return X;
}

/// A = diag(1,2,4), B = [[d1,0],[0,d2],[0,0]], C = I.
inline ssm::QuadraticProblem e1(double delta1 = 0.5, double delta2 = 0.5) {
  Matrix B = Matrix::Zero(3, 2);
  B(0, 0) = delta1;
  B(1, 1) = delta2;
  return ssm::QuadraticProblem::make(diag_op({1, 2, 4}), B, Matrix::Identity(2, 2));
}

inline Matrix random_spd(Index r, std::uint64_t seed, double floor = 0.5) {
  const Matrix G = ssm::gaussian_matrix(r, r, seed);
  return G * G.transpose() / double(r) + floor * Matrix::Identity(r, r);
}

inline Matrix random_sym(Index n, std::uint64_t seed) {
  const Matrix G = ssm::gaussian_matrix(n, n, seed);
  return 0.5 * (G + G.transpose());
}

/// Dense random instance with symmetric A, Gaussian B, SPD C.
inline ssm::QuadraticProblem random_problem(Index n, Index r, std::uint64_t seed, bool identity_c = false) {
  const Matrix A = random_sym(n, seed);
  const Matrix B = ssm::gaussian_matrix(n, r, seed + 1000);
  const Matrix C = identity_c ? Matrix::Identity(r, r) : random_spd(r, seed + 2000);
  return ssm::QuadraticProblem::make(ssm::SparseSymOperator::from_dense(A), B, C);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace testutil
