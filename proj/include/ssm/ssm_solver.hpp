#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ssm/quadratic.hpp"

namespace ssm {

struct ArmijoOptions {
  double c1 = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 30;
};

struct SsmOptions {
  double tol_grad = 1e-8;     // outer stop on |grad f|
  int max_outer = 100;
  double cg_tol = 1e-10;
  int cg_max = 500;
  double newton_tol = 1e-11;  // inner stop on |E_j|
  int newton_max = 50;
  ArmijoOptions armijo{};
  int max_escapes = 5;        // reflection steps per subproblem out of non-qualified points

  /// Throws InvalidArgument on nonpositive tolerances or counts.
  void validate() const;
};

struct IterationRecord {
  int k = 0;
  double f = 0.0;
  double grad_norm = 0.0;
  double gamma_max = 0.0;
  int cg_iters = 0;
  Index subspace_rank = 0;
  // Only meaningful for SSM steps; NaN for the final record and for baselines.
  double surrogate_next = 0.0;    // f_k(X_{k+1})
  double f_next = 0.0;            // f(X_{k+1})
  double multiplier_drift = 0.0;  // |Lambda^_{k+1} - Lambda_{k+1}|
};

struct SolveReport {
  std::string solver;
  std::vector<IterationRecord> iterations;
  StiefelPoint final_point;
  QualifiedCertificate certificate;
  double wall_time_s = 0.0;
  std::string termination;  // converged | max_iterations | stalled | line_search_failure
  long evaluations = 0;     // operator applications (CG iterations + gradient evaluations)
  std::vector<std::string> warnings;

  double objective() const { return iterations.empty() ? 0.0 : iterations.back().f; }
  int steps() const { return iterations.empty() ? 0 : static_cast<int>(iterations.size()) - 1; }
};

/// X_1 = V_g polar(V_g^T B) (rank-deficient V_g^T B completed deterministically) and
/// Lambda_1 = X_1^T (A~ X_1 C - B) = d_r C - Q^T V_g^T B.
std::pair<StiefelPoint, Matrix> initialize(const QuadraticProblem& P);

/// sigma, or a small positive stand-in when the instance is degenerate.
double effective_sigma(double sigma, double d_r);

struct SqpResult {
  Matrix Z;
  int iterations = 0;
  double residual = 0.0;
};

/// Solves P A~ P Z C - Z Lambda = P E_k, E_k = -A~ X_k C + B_k + X_k Lambda, where P
/// projects out span(V_g) and the deflation basis. Lambda must already be safeguarded.
/// Propagates CgFailure (carrying the partial Z) and IndefiniteOperator.
SqpResult sqp_direction(const QuadraticProblem& P, const SurrogateModel& S, const StiefelPoint& X_k,
                        const Matrix& Lambda, const SsmOptions& opts = {});

/// Orthonormal basis of span{V_g, X_k, G_k, Z_k}; dependent directions dropped.
Matrix build_subspace(const GroundSpectrum& ground, const Matrix& X_k, const Matrix& G_k,
                      const Matrix& Z_k);

struct ReducedProblem {
  Matrix A;   // V^T A~ V
  Matrix B;   // V^T B_k
  Matrix Vg;  // V^T V_g
};

ReducedProblem reduce(const SurrogateModel& S, const GroundSpectrum& ground, const Matrix& V);

struct NewtonDirection {
  Matrix Z;
  int cg_iters = 0;
  bool steepest = false;  // CG gave no descent direction; Z = -grad
};

/// Tangent CG solve of P_Y{A (P_Y Z) C - (P_Y Z) S} = P_Y E at Y (dense reduced data).
NewtonDirection newton_direction_subspace(const Matrix& A, const Matrix& C, const Matrix& Y,
                                          const Matrix& S, const Matrix& E,
                                          const SsmOptions& opts = {});

struct SubproblemResult {
  Matrix Y;
  Matrix Xi;
  int iterations = 0;
  int cg_iters = 0;
  double grad_norm = 0.0;
  int escapes = 0;
  int steepest_steps = 0;
  bool stalled = false;
  bool qualified = false;
};

/// Riemannian Newton with safeguarded multipliers on min 1/2<Y, A Y C> - <Y, B> over St(l, r).
/// Non-qualified stationary points are left by a reflection inside span(Vg).
SubproblemResult subproblem_solve(const ReducedProblem& R, const Matrix& C, double d_r,
                                  const Matrix& Y0, const Matrix& Xi0,
                                  const SsmOptions& opts = {});

/// Full SSM run from initialize(P).
SolveReport ssm_solve(const QuadraticProblem& P, const SsmOptions& opts = {});

/// Full SSM run from a given starting point (multiplier taken as the safeguarded one at X0).
SolveReport ssm_solve_from(const QuadraticProblem& P, const StiefelPoint& X0,
                           const SsmOptions& opts = {});

}  // namespace ssm
