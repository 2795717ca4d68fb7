#include "ssm/bench.hpp"

#include <omp.h>

#include "ssm/errors.hpp"

namespace ssm {

namespace {

struct CellSpec {
  std::string suite;
  std::string solver;
  std::uint64_t seed;
};

QuadraticProblem e1_problem() {
  std::vector<Triplet> t{{0, 0, 1.0}, {1, 1, 2.0}, {2, 2, 4.0}};
  Matrix B = Matrix::Zero(3, 2);
  B(0, 0) = B(1, 1) = 0.5;
  return QuadraticProblem::make(SparseSymOperator::from_triplets(3, t, false), B,
                                Matrix::Identity(2, 2));
}

SolveReport solve_with(const QuadraticProblem& P, const std::string& solver, std::uint64_t seed) {
  if (solver == "ssm") return ssm_solve(P);
  BaselineOptions b;
  b.seed = seed;
  if (solver == "pg") return projected_gradient_solve(P, b);
  if (solver == "rgd") return riemannian_gd_solve(P, b);
  throw InvalidArgument("unknown solver '" + solver + "'");
}

BenchCell run_cell(const CellSpec& spec, const BenchOptions& opts) {
  BenchCell cell;
  cell.row.dataset = spec.suite;
  cell.row.solver = spec.solver;
  cell.row.seed = spec.seed;
  if (spec.suite == "circles") {
    const io::Dataset d = io::gen_circles(spec.seed, opts.circles_per_class);
    const WeightedGraph G = knn_gaussian_graph(d.points, 10);
    const auto labels = io::sample_labels(d.labels, 3, 5, spec.seed);
    const SemiSupInstance inst =
        assemble(laplacian(G), labels, balanced_cardinalities(G.size(), 3));
    ClassifyOptions co;
    co.solver = spec.solver == "ssm"  ? ClassifySolver::Ssm
                : spec.solver == "pg" ? ClassifySolver::ProjectedGradient
                : spec.solver == "rgd" ? ClassifySolver::RiemannianGD
                                       : throw InvalidArgument("unknown solver '" + spec.solver + "'");
    co.baseline.seed = spec.seed;
    ClassificationResult res = classify(inst, co, d.labels);
    cell.row.accuracy = res.accuracy;
    cell.report = std::move(res.report);
  } else if (spec.suite == "random") {
    cell.report = solve_with(random_sparse_problem(200, 3, spec.seed), spec.solver, spec.seed);
  } else if (spec.suite == "e1") {
    cell.report = solve_with(e1_problem(), spec.solver, spec.seed);
  } else {
    throw InvalidArgument("unknown suite '" + spec.suite + "'");
  }
  cell.row.objective = cell.report.objective();
  cell.row.residual = cell.report.certificate.residual;
  cell.row.cg_evaluations = cell.report.evaluations;
  cell.row.runtime_s = cell.report.wall_time_s;
  cell.row.iterations = cell.report.steps();
  return cell;
}

}  // namespace

std::vector<std::string> bench_suites() { return {"e1", "random", "circles"}; }
std::vector<std::string> bench_solvers() { return {"ssm", "pg", "rgd"}; }

QuadraticProblem random_sparse_problem(Index n, Index r, std::uint64_t seed) {
  // About six off-diagonal entries per row plus a Gaussian diagonal.
  const Matrix G = gaussian_matrix(n, 8, seed);
  std::vector<Triplet> t;
  for (Index i = 0; i < n; ++i) {
    t.emplace_back(i, i, G(i, 0));
    for (Index j = 1; j <= 3; ++j) {
      const Index k = (i + 1 + static_cast<Index>(std::abs(G(i, j)) * n)) % n;
      if (k != i) t.emplace_back(i, k, 0.5 * G(i, j + 3));
    }
  }
  SparseSymOperator A = SparseSymOperator::from_triplets(n, t, true);
  const Matrix Cg = gaussian_matrix(r, r, seed + 2);
  Matrix C = Cg * Cg.transpose() / static_cast<double>(r) + 0.5 * Matrix::Identity(r, r);
  return QuadraticProblem::make(std::move(A), gaussian_matrix(n, r, seed + 1), std::move(C));
}

std::vector<BenchCell> run_bench(const BenchOptions& opts) {
  if (opts.seeds < 1) throw InvalidArgument("bench needs at least one seed");
  std::vector<CellSpec> specs;
  for (const auto& suite : opts.suites)
    for (const auto& solver : opts.solvers)
      for (int s = 0; s < opts.seeds; ++s)
        specs.push_back({suite, solver, opts.base_seed + static_cast<std::uint64_t>(s)});
  std::vector<BenchCell> cells(specs.size());
  const int nt = opts.threads > 0 ? opts.threads : omp_get_max_threads();
  std::vector<std::exception_ptr> failures(specs.size());
#pragma omp parallel for schedule(dynamic) num_threads(nt)
  for (size_t i = 0; i < specs.size(); ++i) {
    try {
      cells[i] = run_cell(specs[i], opts);
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  return cells;
}

}  // namespace ssm
