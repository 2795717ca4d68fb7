#include "ssm/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ssm::kernels {

namespace {

inline void csr_row(const Csr& S, const Eigen::MatrixXd& X, Eigen::MatrixXd& Y, Eigen::Index i) {
  const auto* outer = S.outerIndexPtr();
  const auto* inner = S.innerIndexPtr();
  const double* val = S.valuePtr();
  const Eigen::Index cols = X.cols();
  for (Eigen::Index c = 0; c < cols; ++c) {
    double acc = 0.0;
    for (auto p = outer[i]; p < outer[i + 1]; ++p) acc += val[p] * X(inner[p], c);
    Y(i, c) = acc;
  }
}

bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
}

std::vector<Neighbor> knn_row(const Eigen::MatrixXd& points, std::size_t k, Eigen::Index i) {
  const Eigen::Index n = points.rows();
  std::vector<Neighbor> cand;
  cand.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j == i) continue;
    cand.push_back({j, (points.row(i) - points.row(j)).squaredNorm()});
  }
  const std::size_t kk = std::min(k, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(kk), cand.end(),
                    neighbor_less);
  cand.resize(kk);
  return cand;
}

}  // namespace

void csr_times_block(const Csr& S, const Eigen::MatrixXd& X, Eigen::MatrixXd& Y) {
  Y.resize(S.rows(), X.cols());
  const Eigen::Index n = S.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) csr_row(S, X, Y, i);
}

std::vector<std::vector<Neighbor>> knn(const Eigen::MatrixXd& points, std::size_t k) {
  const Eigen::Index n = points.rows();
  std::vector<std::vector<Neighbor>> out(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic, 16)
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = knn_row(points, k, i);
  return out;
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

namespace serial {

void csr_times_block(const Csr& S, const Eigen::MatrixXd& X, Eigen::MatrixXd& Y) {
  Y.resize(S.rows(), X.cols());
  for (Eigen::Index i = 0; i < S.rows(); ++i) csr_row(S, X, Y, i);
}

std::vector<std::vector<Neighbor>> knn(const Eigen::MatrixXd& points, std::size_t k) {
  std::vector<std::vector<Neighbor>> out;
  out.reserve(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) out.push_back(knn_row(points, k, i));
  return out;
}

}  // namespace serial

}  // namespace ssm::kernels
