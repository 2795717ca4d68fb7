#include "ssm/ssm_solver.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "ssm/errors.hpp"

namespace ssm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Matrix right_solve_spd(const Matrix& B, const Matrix& C) {
  return C.llt().solve(B.transpose()).transpose();
}

double smallest_singular(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

/// Extends the orthonormal columns of Q (r x rho) to an r x r orthogonal matrix using
/// e_1, e_2, ... in order.
Matrix complete_basis(const Matrix& Q, Index r) {
  Matrix out(r, r);
  Index filled = Q.cols();
  out.leftCols(filled) = Q;
  for (Index i = 0; i < r && filled < r; ++i) {
    Vector v = Vector::Unit(r, i);
    for (int pass = 0; pass < 2; ++pass)
      v -= out.leftCols(filled) * (out.leftCols(filled).transpose() * v);
    const double nv = v.norm();
    if (nv > 1e-8) out.col(filled++) = v / nv;
  }
  return out;
}

// Dense reduced-problem helpers ---------------------------------------------

double sub_value(const ReducedProblem& R, const Matrix& C, const Matrix& Y) {
  return 0.5 * inner(Y, R.A * Y * C) - inner(Y, R.B);
}

Matrix sub_egrad(const ReducedProblem& R, const Matrix& C, const Matrix& Y) {
  return R.A * Y * C - R.B;
}

Matrix tangent(const Matrix& Y, const Matrix& U) { return U - Y * sym(Y.transpose() * U); }

Matrix polar(const Matrix& M) { return polar_project(M).matrix(); }

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

/// Tries to leave a stationary point whose largest gamma exceeds d_r. Candidates:
/// the reflection I - 2vv^T with v in span(Vg) orthogonal to the other C-weighted
/// columns, and rotations of the offending column toward v. Returns the best
/// candidate if it lowers the objective.
bool escape_step(const ReducedProblem& R, const Matrix& C, Matrix& Y, Matrix& Xi) {
  const Index r = Y.cols();
  const SpdRoots roots = spd_roots(C);
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(roots.inv_sqrt * Xi * roots.inv_sqrt));
  const Matrix& U = es.eigenvectors();
  const Index top = r - 1;  // ascending order: largest gamma last
  const Matrix Ybar = Y * roots.sqrt * U;

  Matrix others(Y.rows(), r - 1);
  for (Index j = 0, c = 0; j < r; ++j)
    if (j != top) others.col(c++) = Ybar.col(j);
  Vector v;
  if (r == 1) {
    v = R.Vg.col(0);
  } else {
    Eigen::JacobiSVD<Matrix> svd(others.transpose() * R.Vg, Eigen::ComputeFullV);
    v = R.Vg * svd.matrixV().col(r - 1);
  }
  const double nv = v.norm();
  if (!(nv > 0.0)) return false;
  v /= nv;

  const double f0 = sub_value(R, C, Y);
  double best = f0;
  Matrix best_Y;
  auto consider = [&](Matrix cand) {
    try {
      cand = polar(cand);
    } catch (const RankDeficiency&) {
      return;
    }
    const double fc = sub_value(R, C, cand);
    if (fc < best) {
      best = fc;
      best_Y = std::move(cand);
    }
  };
  consider(Y - 2.0 * v * (v.transpose() * Y));

  // Rotation of the unit direction w = C^{-1/2} u_top (normalized) toward the part of v
  // orthogonal to range(Y).
  Vector w = roots.inv_sqrt * U.col(top);
  w /= w.norm();
  Vector q = v - Y * (Y.transpose() * v);
  const double nq = q.norm();
  if (nq > 1e-8) {
    q /= nq;
    const Vector yw = Y * w;
    for (double t : {M_PI / 2, M_PI / 4, M_PI / 8, M_PI / 16, M_PI / 64}) {
      consider(Y + ((std::cos(t) - 1.0) * yw + std::sin(t) * q) * w.transpose());
      consider(Y + ((std::cos(t) - 1.0) * yw - std::sin(t) * q) * w.transpose());
    }
  }
  if (best_Y.size() == 0 || !(best < f0 - 1e-14 * std::max(1.0, std::abs(f0)))) return false;
  Y = std::move(best_Y);
  Xi = sym(Y.transpose() * sub_egrad(R, C, Y));
  return true;
}

}  // namespace

void SsmOptions::validate() const {
  if (!(tol_grad > 0) || !(cg_tol > 0) || !(newton_tol > 0))
    throw InvalidArgument("SSM tolerances must be positive");
  if (max_outer < 1 || cg_max < 1 || newton_max < 1)
    throw InvalidArgument("SSM iteration counts must be at least 1");
  if (!(armijo.c1 > 0 && armijo.c1 < 1) || !(armijo.backtrack > 0 && armijo.backtrack < 1) ||
      armijo.max_backtracks < 1)
    throw InvalidArgument("Armijo parameters out of range");
  if (max_escapes < 0) throw InvalidArgument("max_escapes must be nonnegative");
}

double effective_sigma(double sigma, double d_r) {
  const double floor = 1e-8 * std::max(std::abs(d_r), 1.0);
  return sigma > floor ? sigma : floor;
}

std::pair<StiefelPoint, Matrix> initialize(const QuadraticProblem& P) {
  const GroundSpectrum& g = P.ground;
  const Index r = P.r();
  const Matrix M = g.Vg.transpose() * P.B;
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  const double cut = 1e-12 * std::max(s(0), std::numeric_limits<double>::min());
  Index rho = 0;
  while (rho < r && s(rho) > cut) ++rho;

  Matrix Q;
  if (rho == r) {
    Q = svd.matrixU() * svd.matrixV().transpose();
  } else {
    const Matrix Uf = complete_basis(svd.matrixU().leftCols(rho), r);
    const Matrix Wf = complete_basis(svd.matrixV().leftCols(rho), r);
    Q = Uf * Wf.transpose();
  }
  Matrix X = g.Vg * Q;
  Matrix Lambda = sym(g.d_r() * P.C - Q.transpose() * M);
  return {StiefelPoint::unchecked(std::move(X)), std::move(Lambda)};
}

SqpResult sqp_direction(const QuadraticProblem& P, const SurrogateModel& S, const StiefelPoint& X_k,
                        const Matrix& Lambda, const SsmOptions& opts) {
  const Matrix& Vg = P.ground.Vg;
  const Matrix& D = P.deflation;
  auto project = [&](Matrix Z) {
    Z -= Vg * (Vg.transpose() * Z);
    if (D.cols() > 0) Z -= D * (D.transpose() * Z);
    return Z;
  };
  const Matrix& X = X_k.matrix();
  const Matrix E = -S.A_tilde.apply(X) * S.C + S.B_k + X * Lambda;
  const Matrix rhs = project(E);
  const BlockOperator op = [&](const Matrix& Z) {
    const Matrix PZ = project(Z);
    return Matrix(project(S.A_tilde.apply(PZ) * S.C) - PZ * Lambda);
  };
  CgOptions cg;
  cg.tol = opts.cg_tol * std::min(1.0, std::max(rhs.norm(), 1e-300));
  cg.max_iter = opts.cg_max;
  CgResult res = cg_solve(op, rhs, cg);
  SqpResult out;
  out.Z = project(res.solution);
  out.iterations = res.iterations;
  out.residual = res.residual;
  return out;
}

Matrix build_subspace(const GroundSpectrum& ground, const Matrix& X_k, const Matrix& G_k,
                      const Matrix& Z_k) {
  const Index n = X_k.rows();
  Matrix M(n, ground.Vg.cols() + X_k.cols() + G_k.cols() + Z_k.cols());
  M << ground.Vg, X_k, G_k, Z_k;
  return thin_qr(M);
}

ReducedProblem reduce(const SurrogateModel& S, const GroundSpectrum& ground, const Matrix& V) {
  ReducedProblem R;
  R.A = sym(V.transpose() * S.A_tilde.apply(V));
  R.B = V.transpose() * S.B_k;
  R.Vg = V.transpose() * ground.Vg;
  return R;
}

NewtonDirection newton_direction_subspace(const Matrix& A, const Matrix& C, const Matrix& Y,
                                          const Matrix& S, const Matrix& E,
                                          const SsmOptions& opts) {
  NewtonDirection out;
  const Matrix rhs = tangent(Y, E);
  if (rhs.norm() == 0.0) {
    out.Z = Matrix::Zero(Y.rows(), Y.cols());
    return out;
  }
  const BlockOperator op = [&](const Matrix& Z) {
    const Matrix PZ = tangent(Y, Z);
    return tangent(Y, A * PZ * C - PZ * S);
  };
  CgOptions cg;
  cg.tol = opts.cg_tol * std::min(1.0, rhs.norm());
  cg.max_iter = opts.cg_max;
  Matrix Z;
  try {
    const CgResult res = cg_solve(op, rhs, cg);
    Z = tangent(Y, res.solution);
    out.cg_iters = res.iterations;
  } catch (const CgFailure& e) {
    Z = tangent(Y, e.partial());
    out.cg_iters = cg.max_iter;
  } catch (const IndefiniteOperator&) {
    Z.resize(0, 0);
  }
  // rhs = -grad when the multiplier is symmetric, so descent means <rhs, Z> > 0.
  if (Z.size() == 0 || !(inner(rhs, Z) > 0.0)) {
    out.Z = rhs;
    out.steepest = true;
  } else {
    out.Z = std::move(Z);
  }
  return out;
}

SubproblemResult subproblem_solve(const ReducedProblem& R, const Matrix& C, double d_r,
                                  const Matrix& Y0, const Matrix& Xi0, const SsmOptions& opts) {
  SubproblemResult out;
  const double sigma = effective_sigma(smallest_singular(R.Vg.transpose() * right_solve_spd(R.B, C)), d_r);
  const double scale = std::max(1.0, R.A.norm() * C.norm() + R.B.norm());
  const double slack = 1e-10 * std::max(1.0, std::abs(d_r));

  Matrix Y = polar(Y0);
  Matrix Xi = sym(Xi0);
  double f = sub_value(R, C, Y);
  Matrix G = tangent(Y, sub_egrad(R, C, Y));
  double gnorm = G.norm();

  for (int j = 0; j < opts.newton_max; ++j) {
    if (gnorm <= opts.newton_tol) {
      Xi = sym(Y.transpose() * sub_egrad(R, C, Y));
      if (gamma_spectrum(Xi, C).maxCoeff() <= d_r + slack) break;
      if (out.escapes >= opts.max_escapes || !escape_step(R, C, Y, Xi)) break;
      ++out.escapes;
      f = sub_value(R, C, Y);
      G = tangent(Y, sub_egrad(R, C, Y));
      gnorm = G.norm();
      continue;
    }
    const Matrix S = safeguard(Xi, C, d_r, sigma);
    const Matrix E = -R.A * Y * C + R.B + Y * Xi;
    NewtonDirection dir = newton_direction_subspace(R.A, C, Y, S, E, opts);
    out.cg_iters += dir.cg_iters;
    if (dir.steepest) ++out.steepest_steps;

    const double slope = -inner(G, dir.Z);  // < 0
    const bool below_roundoff = std::abs(opts.armijo.c1 * slope) < 1e-15 * scale;
    double alpha = 1.0;
    bool accepted = false;
    Matrix Y_new;
    double f_new = f;
    Matrix G_new;
    for (int b = 0; b <= opts.armijo.max_backtracks; ++b, alpha *= opts.armijo.backtrack) {
      try {
        Y_new = polar(Y + alpha * dir.Z);
      } catch (const RankDeficiency&) {
        continue;
      }
      f_new = sub_value(R, C, Y_new);
      if (!below_roundoff) {
        if (f_new <= f + opts.armijo.c1 * alpha * slope) {
          accepted = true;
          break;
        }
      } else if (f_new <= f + 1e-15 * scale) {
        G_new = tangent(Y_new, sub_egrad(R, C, Y_new));
        if (G_new.norm() < gnorm) {
          accepted = true;
          break;
        }
      }
    }
    ++out.iterations;
    if (!accepted) {
      out.stalled = true;
      break;
    }
    Y = std::move(Y_new);
    f = f_new;
    Xi = sym(Y.transpose() * sub_egrad(R, C, Y));
    G = tangent(Y, sub_egrad(R, C, Y));
    gnorm = G.norm();
  }
  out.Y = Y;
  out.Xi = sym(Y.transpose() * sub_egrad(R, C, Y));
  out.grad_norm = gnorm;
  out.qualified = gamma_spectrum(out.Xi, C).maxCoeff() <= d_r + slack;
  return out;
}

namespace {

SolveReport run(const QuadraticProblem& P, StiefelPoint X, Matrix Lambda, const SsmOptions& opts) {
  opts.validate();
  Stopwatch clock;
  SolveReport rep;
  rep.solver = "ssm";
  const GroundSpectrum& g = P.ground;
  const double d_r = g.d_r();
  if (effective_sigma(sigma_nondegeneracy(g, P.B, P.C), d_r) != sigma_nondegeneracy(g, P.B, P.C))
    rep.warnings.push_back("degenerate instance (sigma ~ 0): safeguard uses a small stand-in");

  int unqualified_restarts = 0;
  for (int k = 1;; ++k) {
    const Matrix& x = X.matrix();
    const Matrix Gk = euclidean_grad(P, x);
    const Matrix Lam_orig = sym(x.transpose() * Gk);
    IterationRecord rec;
    rec.k = k;
    rec.f = objective(P, x);
    rec.grad_norm = (Gk - x * Lam_orig).norm();
    rec.gamma_max = gamma_spectrum(Lam_orig, P.C).maxCoeff();
    rec.surrogate_next = rec.f_next = rec.multiplier_drift = kNaN;
    ++rep.evaluations;

    // A stationary point that is not qualified gets further outer steps: the subproblem
    // can leave it by its escape step, which Alg. 1's gradient test alone would miss.
    const bool stationary = rec.grad_norm <= opts.tol_grad;
    const bool qualified_here = rec.gamma_max <= d_r + 1e-10 * std::max(1.0, std::abs(d_r));
    if (stationary && (qualified_here || unqualified_restarts >= 3)) {
      rep.iterations.push_back(rec);
      rep.termination = "converged";
      break;
    }
    if (stationary) ++unqualified_restarts;
    if (k > opts.max_outer) {
      rep.iterations.push_back(rec);
      rep.termination = "max_iterations";
      break;
    }

    const SurrogateModel S = surrogate(P, X);
    const double sigma = effective_sigma(sigma_nondegeneracy(g, S.B_k, P.C), d_r);
    const Matrix Lam_safe = safeguard(Lambda, P.C, d_r, sigma);

    Matrix Z(x.rows(), 0);
    try {
      const SqpResult sqp = sqp_direction(P, S, X, Lam_safe, opts);
      Z = sqp.Z;
      rec.cg_iters = sqp.iterations;
    } catch (const CgFailure& e) {
      // The best CG iterate still enriches the subspace; monotonicity does not depend on it.
      Z = e.partial();
      Z -= g.Vg * (g.Vg.transpose() * Z);
      if (P.deflation.cols() > 0) Z -= P.deflation * (P.deflation.transpose() * Z);
      rec.cg_iters = opts.cg_max;
      rep.warnings.push_back("outer " + std::to_string(k) + ": SQP CG hit its cap; using the partial Z");
    } catch (const IndefiniteOperator&) {
      rep.warnings.push_back("outer " + std::to_string(k) + ": SQP operator indefinite; Z dropped");
    }

    const Matrix V = build_subspace(g, x, Gk, Z);
    rec.subspace_rank = V.cols();
    const ReducedProblem R = reduce(S, g, V);
    const SubproblemResult sub =
        subproblem_solve(R, P.C, d_r, V.transpose() * x, Lam_safe, opts);
    rec.cg_iters += sub.cg_iters;
    rep.evaluations += rec.cg_iters + sub.iterations;
    if (sub.stalled)
      rep.warnings.push_back("outer " + std::to_string(k) + ": subproblem line search stalled");
    if (!sub.qualified)
      rep.warnings.push_back("outer " + std::to_string(k) + ": subproblem point not qualified");

    StiefelPoint X_next = polar_project(V * sub.Y);
    const double fk_cur = S.value(x);
    rec.surrogate_next = S.value(X_next.matrix());
    rec.f_next = objective(P, X_next.matrix());
    const Matrix diff = X_next.matrix() - x;
    rec.multiplier_drift =
        sym(X_next.matrix().transpose() * lift_correction_apply(g, diff) * P.C).norm();
    rep.iterations.push_back(rec);

    const double fscale = 1e-12 * std::max(1.0, std::abs(fk_cur));
    if (rec.surrogate_next > fk_cur + fscale) {
      rep.termination = "stalled";
      rep.warnings.push_back("outer " + std::to_string(k) + ": surrogate increased; step rejected");
      IterationRecord last = rec;
      last.k = k + 1;
      last.cg_iters = 0;
      last.subspace_rank = 0;
      last.surrogate_next = last.f_next = last.multiplier_drift = kNaN;
      rep.iterations.push_back(last);
      break;
    }
    if (diff.norm() <= 1e-15 * std::sqrt(static_cast<double>(x.cols())) &&
        rec.surrogate_next >= fk_cur - fscale) {
      rep.termination = "stalled";
      X = std::move(X_next);
      IterationRecord last = rec;
      last.k = k + 1;
      last.cg_iters = 0;
      last.subspace_rank = 0;
      last.f = rec.f_next;
      last.surrogate_next = last.f_next = last.multiplier_drift = kNaN;
      rep.iterations.push_back(last);
      break;
    }
    X = std::move(X_next);
    Lambda = sub.Xi;
  }

  rep.final_point = X;
  rep.certificate = qualified_certificate(P, X);
  rep.wall_time_s = clock.seconds();
  return rep;
}

}  // namespace

SolveReport ssm_solve(const QuadraticProblem& P, const SsmOptions& opts) {
  auto [X, Lambda] = initialize(P);
  return run(P, std::move(X), std::move(Lambda), opts);
}

SolveReport ssm_solve_from(const QuadraticProblem& P, const StiefelPoint& X0,
                           const SsmOptions& opts) {
  if (X0.n() != P.n() || X0.r() != P.r()) throw InvalidArgument("starting point has wrong shape");
  const SurrogateModel S = surrogate(P, X0);
  const Matrix Lambda = sym(X0.matrix().transpose() * S.gradient(X0.matrix()));
  return run(P, X0, Lambda, opts);
}

}  // namespace ssm
