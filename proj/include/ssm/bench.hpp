#pragma once

#include <string>
#include <vector>

#include "ssm/io.hpp"

namespace ssm {

/// Named instance families: "e1" (the 3x2 worked example), "random" (sparse
/// n = 200, r = 3 with SPD C) and "circles" (3 x 300 points, k = 10, 5 labels per class).
std::vector<std::string> bench_suites();
std::vector<std::string> bench_solvers();  // ssm, pg, rgd

/// The "random" suite instance for a seed.
QuadraticProblem random_sparse_problem(Index n, Index r, std::uint64_t seed);

struct BenchOptions {
  std::vector<std::string> suites{"e1"};
  std::vector<std::string> solvers{"ssm", "pg", "rgd"};
  int seeds = 1;
  std::uint64_t base_seed = 0;
  int threads = 0;  // concurrent cells; <= 0 means all available
  Index circles_per_class = 300;
};

struct BenchCell {
  io::BenchRow row;
  SolveReport report;
};

/// Every (suite, solver, seed) cell, ordered by suite, solver, seed. Baselines start
/// from their seeded random point; SSM from its own initialization.
std::vector<BenchCell> run_bench(const BenchOptions& opts);

}  // namespace ssm
