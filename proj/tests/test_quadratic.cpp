#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ssm/errors.hpp"
#include "ssm/quadratic.hpp"
#include "test_util.hpp"

using namespace ssm;
using testutil::e1;
using testutil::unit_cols;

namespace {

// f along a retraction curve, directly from the formula.
double f_along(const QuadraticProblem& P, const StiefelPoint& X, const Matrix& V, double t) {
  return objective(P, retract(X, {V}, t).matrix());
}

}  // namespace

TEST_CASE("objective on E1 and on the ground block") {
  const QuadraticProblem P = e1();
  CHECK(objective(P, unit_cols(3, {{0, 1}, {1, 1}})) == doctest::Approx(0.5));
  CHECK(objective(P, unit_cols(3, {{0, -1}, {1, 1}})) == doctest::Approx(1.5));

  const QuadraticProblem Q = QuadraticProblem::make(SparseSymOperator::from_dense(testutil::random_sym(6, 1)),
                                                    Matrix::Zero(6, 2), Matrix::Identity(2, 2));
  CHECK(objective(Q, Q.ground.Vg) == doctest::Approx(0.5 * Q.ground.d.sum()));
}

TEST_CASE("gradients and multiplier on E1") {
  const QuadraticProblem P = e1();
  const StiefelPoint X = StiefelPoint::checked(unit_cols(3, {{0, 1}, {1, 1}}));
  Matrix G(3, 2);
  G << 0.5, 0, 0, 1.5, 0, 0;
  CHECK((euclidean_grad(P, X.matrix()) - G).norm() < 1e-15);
  CHECK(riemannian_grad(P, X).dir.norm() < 1e-15);
  CHECK((multiplier(P, X.matrix()) - Vector(Eigen::Vector2d(0.5, 1.5)).asDiagonal().toDenseMatrix()).norm() < 1e-15);
  CHECK((multiplier(P, unit_cols(3, {{0, -1}, {1, 1}})) - 1.5 * Matrix::Identity(2, 2)).norm() < 1e-15);

  const StiefelPoint Y = StiefelPoint::checked(unit_cols(3, {{1, 1}, {2, 1}}));
  const Matrix g = riemannian_grad(P, Y).dir;
  CHECK(g.norm() > 0.1);
  CHECK(skew_defect(Y, g) <= 1e-12);

  // B = A X C gives a zero Euclidean gradient.
  const StiefelPoint Z = random_point(3, 2, 4);
  const Matrix C = testutil::random_spd(2, 3);
  const QuadraticProblem R = QuadraticProblem::make(testutil::diag_op({1, 2, 4}),
                                                    P.A.apply(Z.matrix()) * C, C);
  CHECK(euclidean_grad(R, Z.matrix()).norm() < 1e-14);

  const QuadraticProblem B0 = QuadraticProblem::make(testutil::diag_op({1, 2, 4}), Matrix::Zero(3, 2),
                                                     Matrix::Identity(2, 2));
  const StiefelPoint Vg = StiefelPoint::checked(B0.ground.Vg);
  CHECK(riemannian_grad(B0, Vg).dir.norm() < 1e-14);
  CHECK((multiplier(B0, Vg.matrix()) - B0.ground.d.asDiagonal().toDenseMatrix()).norm() < 1e-14);
}

TEST_CASE("Hessian on E1 tangent directions") {
  const QuadraticProblem P = e1();
  const StiefelPoint X = StiefelPoint::checked(unit_cols(3, {{0, 1}, {1, 1}}));
  const Matrix L = multiplier(P, X.matrix());
  Matrix V = Matrix::Zero(3, 2);
  V(2, 0) = 1;
  CHECK((hessian_apply(P, X, L, {V}).dir - 3.5 * V).norm() < 1e-14);
  // d_3 - d_2 + delta_2 = 4 - 2 + 0.5
  V.setZero();
  V(2, 1) = 1;
  CHECK((hessian_apply(P, X, L, {V}).dir - 2.5 * V).norm() < 1e-14);
}

TEST_CASE("finite-difference gradient and Hessian checks along the retraction") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const QuadraticProblem P = testutil::random_problem(8, 3, seed);
    const StiefelPoint X = random_point(8, 3, seed + 50);
    const Matrix V = tangent_project(X, gaussian_matrix(8, 3, seed + 90)).dir;
    const double h = 1e-6;
    const double fd1 = (f_along(P, X, V, h) - f_along(P, X, V, -h)) / (2 * h);
    const double g = inner(riemannian_grad(P, X).dir, V);
    CHECK(std::abs(fd1 - g) <= 1e-5 * std::max(1.0, std::abs(g)));

    const double k = 1e-4;
    const double fd2 = (f_along(P, X, V, k) - 2 * f_along(P, X, V, 0) + f_along(P, X, V, -k)) / (k * k);
    const double hv = inner(V, hessian_apply(P, X, multiplier(P, X.matrix()), {V}).dir);
    CHECK(std::abs(fd2 - hv) <= 1e-4 * std::max(1.0, std::abs(hv)));
  }
}

TEST_CASE("lift: diagonal, no-op and random eigen structure") {
  const QuadraticProblem P = e1();
  const SparseSymOperator At = lift(P.A, P.ground);
  CHECK((At.to_dense() - Vector(Eigen::Vector3d(2, 2, 4)).asDiagonal().toDenseMatrix()).norm() < 1e-14);

  const QuadraticProblem Q = QuadraticProblem::make(testutil::diag_op({3, 3, 5}), Matrix::Zero(3, 2),
                                                    Matrix::Identity(2, 2));
  CHECK(!lift(Q.A, Q.ground).has_correction());

  const QuadraticProblem R = testutil::random_problem(9, 3, 7);
  const Matrix Ad = R.A.to_dense();
  const Matrix Atd = lift(R.A, R.ground).to_dense();
  CHECK((Atd * R.ground.Vg - R.ground.d_r() * R.ground.Vg).norm() <= 1e-10);
  CHECK(min_eig(sym(Atd - Ad)) >= -1e-12);
  const Vector ev = dense_sym_eig(sym(Atd)).values;
  const Vector ref = dense_sym_eig(Ad).values;
  for (int i = 0; i < 3; ++i) CHECK(std::abs(ev(i) - R.ground.d_r()) <= 1e-10);
  for (int i = 3; i < 9; ++i) CHECK(std::abs(ev(i) - ref(i)) <= 1e-10);
}

TEST_CASE("surrogate: gradient match and domination") {
  const QuadraticProblem P = e1();
  const StiefelPoint Xk = StiefelPoint::checked(unit_cols(3, {{1, 1}, {2, 1}}));
  const SurrogateModel S = surrogate(P, Xk);
  // D = diag(1,0,0) so D X_k C = 0 for X_k = [e2, e3].
  CHECK((S.B_k - P.B).norm() < 1e-15);
  CHECK(S.value(Xk.matrix()) == doctest::Approx(objective(P, Xk.matrix())));

  const QuadraticProblem Q = QuadraticProblem::make(testutil::diag_op({3, 3, 5}), Matrix::Ones(3, 2),
                                                    Matrix::Identity(2, 2));
  const SurrogateModel SQ = surrogate(Q, random_point(3, 2, 1));
  CHECK((SQ.B_k - Q.B).norm() < 1e-15);

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const QuadraticProblem R = testutil::random_problem(7, 2, seed);
    const StiefelPoint X = random_point(7, 2, seed + 10);
    const SurrogateModel M = surrogate(R, X);
    CHECK((M.gradient(X.matrix()) - euclidean_grad(R, X.matrix())).norm() <= 1e-12);
    CHECK(std::abs(M.value(X.matrix()) - objective(R, X.matrix())) <= 1e-12);
    const Matrix D = lift(R.A, R.ground).to_dense() - R.A.to_dense();
    for (std::uint64_t s = 0; s < 20; ++s) {
      const Matrix Y = random_point(7, 2, 100 * seed + s).matrix();
      const Matrix Dx = X.matrix() - Y;
      CHECK(M.value(Y) >= objective(R, Y) - 1e-12);
      CHECK(std::abs(M.value(Y) - objective(R, Y) - 0.5 * inner(Dx, D * Dx * R.C)) <= 1e-10);
    }
  }
}

TEST_CASE("sigma_nondegeneracy") {
  const QuadraticProblem P = e1();
  CHECK(sigma_nondegeneracy(P.ground, P.B, P.C) == doctest::Approx(0.5));
  CHECK(sigma_nondegeneracy(P.ground, Matrix::Zero(3, 2), P.C) == 0.0);
  const QuadraticProblem R = testutil::random_problem(6, 3, 2);
  const Matrix M = R.ground.Vg.transpose() * R.B * R.C.inverse();
  Eigen::BDCSVD<Matrix> svd(M);
  CHECK(std::abs(sigma_nondegeneracy(R.ground, R.B, R.C) - svd.singularValues()(2)) <= 1e-12);
}

TEST_CASE("qualified_certificate on E1") {
  const QuadraticProblem P = e1();
  const QualifiedCertificate c = qualified_certificate(P, StiefelPoint::checked(unit_cols(3, {{0, 1}, {1, 1}})));
  CHECK(c.residual < 1e-15);
  CHECK(c.gamma(0) == doctest::Approx(0.5));
  CHECK(c.gamma(1) == doctest::Approx(1.5));
  CHECK(c.qualified);
  CHECK_FALSE(c.global);
  CHECK(c.prop_identity_c);
  CHECK(c.safeguard_bound == doctest::Approx(1.5));

  const QuadraticProblem Q = e1(1.5, 0.5);
  const QualifiedCertificate d = qualified_certificate(Q, StiefelPoint::checked(unit_cols(3, {{0, -1}, {1, 1}})));
  CHECK(d.residual < 1e-15);
  CHECK(d.gamma_max() == doctest::Approx(2.5));
  CHECK_FALSE(d.qualified);
  CHECK_FALSE(d.prop_identity_c);

  const QualifiedCertificate e = qualified_certificate(P, random_point(3, 2, 3));
  CHECK(e.residual > 1e-3);
  CHECK_FALSE(e.qualified);
}

TEST_CASE("safeguard clamps the C-weighted spectrum") {
  const Matrix L = Vector(Eigen::Vector2d(3, 1)).asDiagonal();
  CHECK((safeguard(L, Matrix::Identity(2, 2), 2.0, 0.5) - Vector(Eigen::Vector2d(1.5, 1)).asDiagonal().toDenseMatrix()).norm() < 1e-14);
  const Matrix L2 = Vector(Eigen::Vector2d(1, 0.2)).asDiagonal();
  CHECK((safeguard(L2, Matrix::Identity(2, 2), 2.0, 0.5) - L2).norm() < 1e-14);
  CHECK_THROWS_AS(safeguard(L, Matrix::Identity(2, 2), 2.0, 0.0), DegenerateInstance);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Matrix Lr = 3.0 * testutil::random_sym(3, seed);
    const Matrix C = testutil::random_spd(3, seed + 5);
    const Matrix S = safeguard(Lr, C, 1.0, 0.3);
    const SpdRoots roots = spd_roots(C);
    CHECK(max_eig(sym(roots.inv_sqrt * S * roots.inv_sqrt)) <= 0.7 + 1e-12);
  }
}

TEST_CASE("lower_bound") {
  const QuadraticProblem P = e1();
  CHECK(lower_bound(P) == doctest::Approx(1.0));
  const QuadraticProblem L = lifted_problem(P);
  CHECK(objective(L, unit_cols(3, {{0, 1}, {1, 1}})) == doctest::Approx(1.0));
  const QuadraticProblem Z = QuadraticProblem::make(testutil::diag_op({1, 2, 4}), Matrix::Zero(3, 2),
                                                    Matrix::Identity(2, 2));
  CHECK(lower_bound(Z) == doctest::Approx(2.0));
  const QuadraticProblem R = lifted_problem(testutil::random_problem(6, 2, 9));
  const double lb = lower_bound(R);
  for (std::uint64_t s = 0; s < 100; ++s) CHECK(objective(R, random_point(6, 2, s).matrix()) >= lb - 1e-12);
}

TEST_CASE("degenerate_solution") {
  // B = 0: X = V_g U.
  const QuadraticProblem P = lifted_problem(QuadraticProblem::make(testutil::diag_op({1, 2, 4}), Matrix::Zero(3, 2),
                                                                   Matrix::Identity(2, 2)));
  const Matrix U = polar_project(gaussian_matrix(2, 2, 1)).matrix();
  const StiefelPoint X0 = degenerate_solution(P.A, P.ground, P.B, P.C, U);
  CHECK((X0.matrix() - P.ground.Vg * U).norm() < 1e-12);
  CHECK((multiplier(P, X0.matrix()) - P.ground.d_1() * P.C).norm() < 1e-12);

  // A~ = diag(2,2,4), r = 1, B = e3.
  GroundSpectrum g;
  g.d = Vector::Constant(1, 2.0);
  g.d_next = 2.0;
  g.Vg = unit_cols(3, {{0, 1}});
  Matrix B = Matrix::Zero(3, 1);
  B(2, 0) = 1;
  const StiefelPoint X = degenerate_solution(testutil::diag_op({2, 2, 4}), g, B, Matrix::Identity(1, 1),
                                             Matrix::Identity(1, 1));
  CHECK(X.matrix()(0, 0) == doctest::Approx(std::sqrt(0.75)));
  CHECK(X.matrix()(2, 0) == doctest::Approx(0.5));
  CHECK(X.feasibility_error() < 1e-12);
  CHECK_THROWS_AS(degenerate_solution(testutil::diag_op({2, 2, 4}), g, 3.0 * B, Matrix::Identity(1, 1),
                                      Matrix::Identity(1, 1)),
                  DegenerateInstance);
  Matrix Bbad = B;
  Bbad(0, 0) = 1;
  CHECK_THROWS_AS(degenerate_solution(testutil::diag_op({2, 2, 4}), g, Bbad, Matrix::Identity(1, 1),
                                      Matrix::Identity(1, 1)),
                  DegenerateInstance);

  // Random degenerate instance: B C^{-1} orthogonal to V_g and small.
  const QuadraticProblem R = lifted_problem(testutil::random_problem(8, 2, 3));
  const Matrix Vg = R.ground.Vg;
  Matrix W = gaussian_matrix(8, 2, 5);
  W -= Vg * (Vg.transpose() * W);
  const Matrix C = testutil::random_spd(2, 6);
  const Matrix Bd = 0.05 * W * C;
  const StiefelPoint Xd = degenerate_solution(R.A, R.ground, Bd, C, Matrix::Identity(2, 2));
  CHECK(Xd.feasibility_error() <= 1e-10);
  const Matrix Ad = R.A.to_dense() - R.ground.d_1() * Matrix::Identity(8, 8);
  CHECK((Ad * Xd.matrix() - Bd * C.inverse()).norm() <= 1e-10);
}

TEST_CASE("second_order_margin") {
  const QuadraticProblem P = e1();
  const StiefelPoint X = StiefelPoint::checked(unit_cols(3, {{0, 1}, {1, 1}}));
  CHECK(second_order_margin(P, X, orthogonal_complement(X)) == doctest::Approx(2.5));

  // In-plane rotation at X2 = [-e1, e2]: curvature (delta2 - delta1)/2 along the unit tangent
  // V with X2^T V skew. With delta2 < delta1 the margin stays positive while the Hessian is
  // indefinite.
  Matrix V = Matrix::Zero(3, 2);
  V(0, 1) = 1 / std::sqrt(2.0);
  V(1, 0) = 1 / std::sqrt(2.0);
  const StiefelPoint X2 = StiefelPoint::checked(unit_cols(3, {{0, -1}, {1, 1}}));
  CHECK(skew_defect(X2, V) < 1e-15);
  for (auto [d1, d2] : {std::pair{0.5, 0.6}, std::pair{0.6, 0.5}}) {
    const QuadraticProblem Q = e1(d1, d2);
    const double curv = inner(V, hessian_apply(Q, X2, multiplier(Q, X2.matrix()), {V}).dir);
    CHECK(curv == doctest::Approx((d2 - d1) / 2));
    CHECK(second_order_margin(Q, X2, orthogonal_complement(X2)) == doctest::Approx(4.0 - (1 + d1)));
  }

  const QuadraticProblem Z = QuadraticProblem::make(testutil::diag_op({1, 2, 4}), Matrix::Zero(3, 2),
                                                    Matrix::Identity(2, 2));
  const StiefelPoint Vg = StiefelPoint::checked(Z.ground.Vg);
  CHECK(second_order_margin(Z, Vg, orthogonal_complement(Vg)) == doctest::Approx(2.0));
  CHECK_THROWS_AS(second_order_margin(P, random_point(3, 2, 1), orthogonal_complement(random_point(3, 2, 1))),
                  NotCritical);
}

TEST_CASE("problem validation") {
  CHECK_THROWS_AS(QuadraticProblem::make(testutil::diag_op({1, 2, 2}), Matrix::Zero(3, 2), Matrix::Identity(2, 2)),
                  InvalidArgument);
  CHECK_THROWS_AS(QuadraticProblem::make(testutil::diag_op({1, 2, 4}), Matrix::Zero(3, 2), -Matrix::Identity(2, 2)),
                  InvalidArgument);
  CHECK_THROWS_AS(QuadraticProblem::make(testutil::diag_op({1, 2, 4}), Matrix::Zero(2, 2), Matrix::Identity(2, 2)),
                  InvalidArgument);
}
