#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ssm/baselines.hpp"

namespace ssm {

struct WeightedGraph {
  Csr W;          // symmetric, nonnegative, zero diagonal
  Vector degree;  // row sums of W

  Index size() const { return W.rows(); }

  /// Validates symmetry, nonnegativity and the zero diagonal.
  static WeightedGraph from_weights(Csr W);
  /// Off-diagonal part of -L.
  static WeightedGraph from_laplacian(const Csr& L);
};

/// w_ij = exp(-4 |x_i - x_j|^2 / d_k(x_i)^2) over the k nearest neighbours of x_i,
/// then W <- (W + W^T)/2. Throws DegenerateInstance on duplicate points.
WeightedGraph knn_gaussian_graph(const Matrix& points, Index k);

/// diag(w) - W
SparseSymOperator laplacian(const WeightedGraph& G);

/// cut(S) / min(vol S, vol S^c). Throws InvalidArgument for empty or full S.
double conductance(const WeightedGraph& G, const std::vector<Index>& S);

/// Component id per vertex (ids in order of first vertex), by BFS.
std::vector<Index> connected_components(const WeightedGraph& G);

struct Label {
  Index vertex;
  int cls;  // 0-based
};

/// c_i = m/r rounded by largest remainder (ties to the lower class).
std::vector<Index> balanced_cardinalities(Index m, int r);

struct RankReduction {
  Matrix Q;       // r x r', orthonormal columns
  Vector C_diag;  // r' positive eigenvalues, ascending
  Index r_prime() const { return C_diag.size(); }
};

/// C = Q diag(C_diag) Q^T over the eigenvalues above 1e-10 * max eigenvalue.
/// Throws DegenerateInstance when none survive.
RankReduction rank_reduce(const Matrix& C);

/// Partially labeled problem with labeled vertices ordered first.
struct SemiSupInstance {
  Index r = 0;
  std::vector<Index> labeled;    // original vertex ids, ascending
  std::vector<Index> unlabeled;  // original vertex ids, ascending
  std::vector<int> labeled_cls;
  Csr L;  // Laplacian, original vertex order
  Csr L_ll, L_lu, L_ul, L_uu;
  Matrix X_l;  // m x r one-hot
  Vector c, c_u;
  Matrix Z0;  // n^-1 1 c_u^T
  SparseSymOperator A;  // P L_uu P (sparse L_uu plus a rank-2 correction)
  Matrix B;             // P (L_uu Z0 + L_ul X_l)
  Matrix C;             // diag(c) - X_l^T X_l - Z0^T Z0
  RankReduction reduction;
  /// <X, L X> = <Z, A Z> + 2 <Z, B> + constant for X_u = Z + Z0 with 1^T Z = 0.
  double constant = 0.0;

  Index m() const { return static_cast<Index>(labeled.size()); }
  Index n() const { return static_cast<Index>(unlabeled.size()); }
};

/// Throws CardinalityError when c is infeasible (wrong length, c_i below the
/// labeled count, sum c != vertex count, n < r) or leaves nothing to decide (r' = 0).
SemiSupInstance assemble(const SparseSymOperator& L, const std::vector<Label>& labels,
                         const std::vector<Index>& c);

/// Standard form: A, B_std = -B Q C~^{1/2}, C_std = diag(C~), deflation 1/sqrt(n).
QuadraticProblem standard_problem(const SemiSupInstance& inst);

/// X_u = Z~ C~^{1/2} Q^T + Z0
Matrix recover_unlabeled(const SemiSupInstance& inst, const Matrix& Z);

/// Row argmax, ties to the lowest class.
std::vector<int> row_argmax(const Matrix& X);

enum class ClassifySolver { Ssm, ProjectedGradient, RiemannianGD };

struct ClassifyOptions {
  ClassifySolver solver = ClassifySolver::Ssm;
  SsmOptions ssm{};
  BaselineOptions baseline{};
};

struct ClassificationResult {
  Matrix X_u;               // rows follow inst.unlabeled
  std::vector<int> labels;  // every vertex, original order
  std::optional<double> accuracy;  // over unlabeled vertices
  double objective = 0.0;          // standard-form f at Z~
  double laplacian_objective = 0.0;  // <X, L X>
  std::vector<double> class_conductance;
  std::vector<Index> unreachable;  // unlabeled vertices with no path to a label
  SolveReport report;
};

/// Solves the standard-form problem and recovers labels. `truth` (per vertex,
/// original order) enables the accuracy field.
ClassificationResult classify(const SemiSupInstance& inst, const ClassifyOptions& opts = {},
                              const std::vector<int>& truth = {});

}  // namespace ssm
