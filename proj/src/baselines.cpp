#include "ssm/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <omp.h>

#include "ssm/errors.hpp"

namespace ssm {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

IterationRecord record(const QuadraticProblem& P, int k, const Matrix& X, const Matrix& G) {
  IterationRecord rec;
  const Matrix L = sym(X.transpose() * G);
  rec.k = k;
  rec.f = objective(P, X);
  rec.grad_norm = (G - X * L).norm();
  rec.gamma_max = gamma_spectrum(L, P.C).maxCoeff();
  rec.surrogate_next = rec.f_next = rec.multiplier_drift = std::numeric_limits<double>::quiet_NaN();
  return rec;
}

// Random point, moved off the deflation directions so iterates stay feasible.
Matrix default_start(const QuadraticProblem& P, std::uint64_t seed) {
  Matrix X = random_point(P.n(), P.r(), seed).matrix();
  if (P.deflation.cols() == 0) return X;
  X -= P.deflation * (P.deflation.transpose() * X);
  return polar_project(X).matrix();
}

enum class Kind { Projected, Riemannian };

SolveReport gradient_solve(const QuadraticProblem& P, const BaselineOptions& opts, Kind kind) {
  opts.validate();
  const auto t0 = std::chrono::steady_clock::now();
  SolveReport rep;
  rep.solver = kind == Kind::Projected ? "pg" : "rgd";
  Matrix X = opts.initial ? opts.initial->matrix() : default_start(P, opts.seed);
  if (X.rows() != P.n() || X.cols() != P.r()) throw InvalidArgument("initial point has wrong shape");

  const double fixed = opts.alpha > 0 ? opts.alpha : 1.0 / lipschitz_estimate(P, opts.seed);
  // Armijo trials start at twice the previous accepted step, the first one at 1/L.
  double alpha = opts.rule == StepRule::Fixed ? fixed : 0.5 * fixed;

  auto candidate = [&](const Matrix& Xc, const Matrix& dir, double a) {
    return polar_project(Xc - a * dir).matrix();
  };

  for (int k = 1;; ++k) {
    const Matrix G = euclidean_grad(P, X);
    ++rep.evaluations;
    IterationRecord rec = record(P, k, X, G);
    rep.iterations.push_back(rec);
    if (rec.grad_norm <= opts.tol_grad) {
      rep.termination = "converged";
      break;
    }
    if (k > opts.max_iter) {
      rep.termination = "max_iterations";
      break;
    }
    const Matrix dir = kind == Kind::Projected ? G : Matrix(G - X * sym(X.transpose() * G));
    Matrix X_new;
    if (opts.rule == StepRule::Fixed) {
      X_new = candidate(X, dir, alpha);
    } else {
      // Armijo on <grad, X_new - X> (projection) or -alpha |grad|^2 (retraction).
      alpha = std::min(2.0 * alpha, 1e6 * fixed);
      bool ok = false;
      for (int b = 0; b <= opts.armijo.max_backtracks; ++b, alpha *= opts.armijo.backtrack) {
        X_new = candidate(X, dir, alpha);
        const double f_new = objective(P, X_new);
        ++rep.evaluations;
        const double pred = kind == Kind::Projected ? inner(G, X_new - X)
                                                    : -alpha * rec.grad_norm * rec.grad_norm;
        // Below roundoff of f the Armijo test is noise; require a smaller gradient instead.
        const double noise = 1e-14 * std::max(1.0, std::abs(rec.f));
        if (std::abs(opts.armijo.c1 * pred) >= noise) {
          if (f_new <= rec.f + opts.armijo.c1 * pred) {
            ok = true;
            break;
          }
        } else if (f_new <= rec.f + noise) {
          const Matrix Gn = euclidean_grad(P, X_new);
          if ((Gn - X_new * sym(X_new.transpose() * Gn)).norm() < rec.grad_norm) {
            ok = true;
            break;
          }
        }
      }
      if (!ok) {
        rep.termination = "line_search_failure";
        rep.warnings.push_back("Armijo backtracking exhausted at iteration " + std::to_string(k));
        break;
      }
    }
    X = std::move(X_new);
  }
  rep.final_point = StiefelPoint::unchecked(X);
  rep.certificate = qualified_certificate(P, rep.final_point);
  rep.wall_time_s = seconds_since(t0);
  return rep;
}

}  // namespace

void BaselineOptions::validate() const {
  if (alpha < 0 || (rule == StepRule::Fixed && !(alpha >= 0)))
    throw InvalidArgument("step size must be positive");
  if (!(tol_grad > 0) || max_iter < 1) throw InvalidArgument("baseline tolerances must be positive");
  if (!(armijo.c1 > 0 && armijo.c1 < 1) || !(armijo.backtrack > 0 && armijo.backtrack < 1) ||
      armijo.max_backtracks < 1)
    throw InvalidArgument("Armijo parameters out of range");
}

double lipschitz_estimate(const QuadraticProblem& P, std::uint64_t seed) {
  Matrix v = gaussian_matrix(P.n(), 1, seed + 17);
  v /= v.norm();
  double est = 0.0;
  for (int it = 0; it < 200; ++it) {
    Matrix w = P.A.apply(v);
    const double nw = w.norm();
    if (nw == 0.0) break;
    const bool settled = std::abs(nw - est) <= 1e-8 * nw;
    est = nw;
    v = w / nw;
    if (settled) break;
  }
  const double c = std::max(std::abs(max_eig(P.C)), std::abs(min_eig(P.C)));
  return std::max(est * c, 1e-12);
}

SolveReport projected_gradient_solve(const QuadraticProblem& P, const BaselineOptions& opts) {
  return gradient_solve(P, opts, Kind::Projected);
}

SolveReport riemannian_gd_solve(const QuadraticProblem& P, const BaselineOptions& opts) {
  return gradient_solve(P, opts, Kind::Riemannian);
}

TangentVector riemannian_newton_step(const QuadraticProblem& P, const StiefelPoint& X,
                                     Index dense_limit) {
  const Matrix L = multiplier(P, X.matrix());
  const Matrix g = riemannian_grad(P, X).dir;
  const Index n = X.n();
  const Index r = X.r();
  auto hess = [&](const Matrix& Z) {
    return hessian_apply(P, X, L, tangent_project(X, Z)).dir;
  };
  if (n * r <= dense_limit) {
    const Index m = n * r;
    Matrix H(m, m);
    for (Index j = 0; j < m; ++j) {
      Matrix E = Matrix::Zero(n, r);
      E(j % n, j / n) = 1.0;
      H.col(j) = hess(E).reshaped();
    }
    const double scale = std::max(1.0, H.norm());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym(H), Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) < -1e-10 * scale)
      throw IndefiniteOperator("Riemannian Hessian is indefinite at X (min eigenvalue " +
                               std::to_string(es.eigenvalues()(0)) + ")");
  }
  if (g.norm() == 0.0) return {Matrix::Zero(n, r)};
  CgOptions cg;
  cg.tol = 1e-10 * std::min(1.0, g.norm());
  cg.max_iter = static_cast<int>(std::max<Index>(100, 4 * n * r));
  const CgResult res = cg_solve([&](const Matrix& Z) { return hess(Z); }, -g, cg);
  return tangent_project(X, res.solution);
}

TrsSolution sphere_trs_oracle(const Matrix& A, const Vector& b) {
  const Index n = A.rows();
  if (A.cols() != n || b.size() != n) throw InvalidArgument("sphere_trs_oracle: shape mismatch");
  if (n > 2000) throw InvalidArgument("sphere_trs_oracle is dense; n must be <= 2000");
  const EigPairs eig = dense_sym_eig(A);
  const Vector& d = eig.values;
  const Vector beta = eig.vectors.transpose() * b;
  const double d1 = d(0);
  const double eig_tol = 1e-10 * std::max(1.0, std::abs(d1));
  Index g = 1;
  while (g < n && d(g) - d1 <= eig_tol) ++g;
  const double ground_b = beta.head(g).norm();
  const double bnorm = b.norm();

  TrsSolution out;
  auto x_of = [&](double lambda) {
    Vector c = Vector::Zero(n);
    for (Index i = 0; i < n; ++i) c(i) = beta(i) == 0.0 ? 0.0 : beta(i) / (d(i) - lambda);
    return c;
  };

  if (ground_b <= 1e-12 * std::max(1.0, bnorm)) {
    Vector c = Vector::Zero(n);
    for (Index i = g; i < n; ++i) c(i) = beta(i) / (d(i) - d1);
    const double c_perp = c.norm();
    if (c_perp <= 1.0) {
      c(0) = std::sqrt(std::max(0.0, 1.0 - c_perp * c_perp));
      out.x = eig.vectors * c;
      out.lambda = d1;
      out.degenerate = true;
      out.objective = out.x.dot(A * out.x) - 2.0 * b.dot(out.x);
      return out;
    }
  }

  // |x(lambda)| is increasing on lambda < d1; solve 1/|x(lambda)| = 1 in the bracket.
  double lo = d1 - bnorm;
  double hi = d1 - ground_b;
  double lambda = hi;
  if (hi - lo > 0) {
    lambda = 0.5 * (lo + hi);
    for (int it = 0; it < 80; ++it) {
      const Vector c = x_of(lambda);
      const double nx = c.norm();
      if (!std::isfinite(nx) || nx > 1.0) hi = lambda; else lo = lambda;
      if (std::abs(nx - 1.0) <= 1e-15 || hi - lo <= 1e-15 * std::max(1.0, std::abs(lambda))) break;
      // Newton on psi(lambda) = 1/|x| - 1: psi' = -(sum beta^2/(d-lambda)^3)/|x|^3.
      double s3 = 0.0;
      for (Index i = 0; i < n; ++i)
        if (beta(i) != 0.0) s3 += beta(i) * beta(i) / std::pow(d(i) - lambda, 3);
      double next = lambda;
      if (std::isfinite(nx) && s3 > 0) next = lambda + (1.0 / nx - 1.0) * nx * nx * nx / s3;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      lambda = next;
    }
  }
  const Vector c = x_of(lambda);
  out.x = eig.vectors * c;
  const double nx = out.x.norm();
  if (nx > 0) out.x /= nx;
  out.lambda = lambda;
  out.objective = out.x.dot(A * out.x) - 2.0 * b.dot(out.x);
  return out;
}

MultistartResult multistart_oracle(const QuadraticProblem& P, int n_starts, BaselineSolver inner,
                                   std::uint64_t seed, BaselineOptions opts, int threads) {
  if (n_starts < 1) throw InvalidArgument("multistart needs at least one start");
  std::vector<SolveReport> reports(static_cast<size_t>(n_starts));
  const int nt = threads > 0 ? threads : omp_get_max_threads();
  opts.initial.reset();
#pragma omp parallel for schedule(dynamic) num_threads(nt)
  for (int i = 0; i < n_starts; ++i) {
    BaselineOptions o = opts;
    o.seed = seed + static_cast<std::uint64_t>(i);
    reports[i] = inner == BaselineSolver::ProjectedGradient ? projected_gradient_solve(P, o)
                                                            : riemannian_gd_solve(P, o);
  }
  MultistartResult out;
  out.objectives.reserve(reports.size());
  int best = 0;
  for (int i = 0; i < n_starts; ++i) {
    out.objectives.push_back(reports[i].objective());
    if (reports[i].objective() < reports[best].objective()) best = i;  // ties keep the lower seed
  }
  out.best = std::move(reports[best]);
  out.best.solver = "multistart-" + out.best.solver;
  out.best_seed = seed + static_cast<std::uint64_t>(best);
  return out;
}

}  // namespace ssm
