#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ssm/ssm_solver.hpp"

namespace ssm {

enum class StepRule { Fixed, Armijo };

struct BaselineOptions {
  StepRule rule = StepRule::Armijo;
  double alpha = 0.0;  // fixed step; 0 means 1 / (|A|_2 |C|_2)
  double tol_grad = 1e-8;
  int max_iter = 5000;
  std::uint64_t seed = 0;
  /// Starting point; when absent, random_point(n, r, seed) with the deflation
  /// directions projected out and re-polarized.
  std::optional<StiefelPoint> initial;
  ArmijoOptions armijo{};

  void validate() const;
};

/// X <- P_M(X - alpha (A X C - B)).
SolveReport projected_gradient_solve(const QuadraticProblem& P, const BaselineOptions& opts = {});

/// X <- R_X(-alpha grad f(X)).
SolveReport riemannian_gd_solve(const QuadraticProblem& P, const BaselineOptions& opts = {});

/// |A|_2 |C|_2 with |A|_2 from seeded power iteration.
double lipschitz_estimate(const QuadraticProblem& P, std::uint64_t seed = 0);

/// Solves Hess f(X)[Z] = -grad f(X) on the tangent space by CG (tolerance 1e-10).
/// Throws IndefiniteOperator when the Hessian is not PSD at X: checked densely on the
/// tangent space for n r <= dense_limit, otherwise through CG's curvature monitor.
TangentVector riemannian_newton_step(const QuadraticProblem& P, const StiefelPoint& X,
                                     Index dense_limit = 1200);

struct TrsSolution {
  Vector x;
  double lambda = 0.0;
  bool degenerate = false;
  double objective = 0.0;  // x^T A x - 2 b^T x
};

/// Global minimizer of x^T A x - 2 <x, b> on the unit sphere (dense, n <= 2000):
/// (A - lambda I) x = b with A - lambda I PSD.
TrsSolution sphere_trs_oracle(const Matrix& A, const Vector& b);

enum class BaselineSolver { ProjectedGradient, RiemannianGD };

struct MultistartResult {
  SolveReport best;
  std::uint64_t best_seed = 0;
  std::vector<double> objectives;  // per start, in seed order
};

/// Best of n_starts runs from random_point(n, r, seed + i). Starts run concurrently
/// (threads <= 0: all available); the winner is the smallest (objective, seed).
MultistartResult multistart_oracle(const QuadraticProblem& P, int n_starts, BaselineSolver inner,
                                   std::uint64_t seed, BaselineOptions opts = {}, int threads = 0);

}  // namespace ssm
