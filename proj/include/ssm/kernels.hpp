#pragma once

// Data-parallel hot loops. Every kernel has a serial reference in
// `kernels::serial` with identical arithmetic order per output row, so the
// OpenMP versions reproduce the serial results bit for bit.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace ssm::kernels {

using Csr = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Neighbor {
  Eigen::Index index;
  double dist2;
};

/// Y = S * X for a CSR matrix S and a dense block X.
void csr_times_block(const Csr& S, const Eigen::MatrixXd& X, Eigen::MatrixXd& Y);

/// k nearest neighbours of every row of `points` (self excluded), sorted by
/// (squared distance, index).
std::vector<std::vector<Neighbor>> knn(const Eigen::MatrixXd& points, std::size_t k);

/// Number of threads the parallel kernels will use.
int max_threads();
void set_threads(int n);

namespace serial {
void csr_times_block(const Csr& S, const Eigen::MatrixXd& X, Eigen::MatrixXd& Y);
std::vector<std::vector<Neighbor>> knn(const Eigen::MatrixXd& points, std::size_t k);
}  // namespace serial

}  // namespace ssm::kernels
