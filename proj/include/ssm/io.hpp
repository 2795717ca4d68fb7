#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssm/graph.hpp"

namespace ssm::io {

// Matrices ------------------------------------------------------------------

/// Matrix Market coordinate (real | integer | pattern; general | symmetric) or
/// array (real; general | symmetric). Throws FormatError.
Csr read_matrix_market(const std::string& path);
/// Symmetric Matrix Market files are expanded; others must be symmetric.
SparseSymOperator read_operator(const std::string& path);
/// Writes coordinate real; `symmetric` stores the lower triangle only.
void write_matrix_market(const std::string& path, const Csr& S, bool symmetric = false);

/// Headerless comma-separated numbers, one row per line.
Matrix read_csv(const std::string& path);
void write_csv(const std::string& path, const Matrix& M);

/// Little-endian uint32 rows, uint32 cols, then rows*cols float64 in row-major order.
Matrix read_binary(const std::string& path);
void write_binary(const std::string& path, const Matrix& M);

/// Dispatch on extension: .mtx, .csv, .bin.
Matrix read_dense(const std::string& path);

/// IDX images (magic 0x00000803): one flattened image per row, scaled to [0, 1].
Matrix load_idx(const std::string& path);
/// IDX labels (magic 0x00000801).
std::vector<int> load_idx_labels(const std::string& path);

/// "vertex_index,class_index" rows (0-based); a non-numeric first line is a header.
std::vector<Label> read_labels_csv(const std::string& path);

// Datasets ------------------------------------------------------------------

struct Dataset {
  Matrix points;
  std::vector<int> labels;  // 0-based circle index
};

/// n_per points per circle, uniform angle, radius + N(0, noise^2). Deterministic per seed.
Dataset gen_circles(std::uint64_t seed, Index n_per = 2000, const std::vector<double>& radii = {1, 2, 3},
                    double noise = 0.2);

void write_dataset_csv(const std::string& path, const Dataset& d);

/// `labels_per_class` vertices of each class, chosen by a seeded shuffle; ascending vertex order.
std::vector<Label> sample_labels(const std::vector<int>& truth, int r, Index labels_per_class,
                                 std::uint64_t seed);

// Problem description file ----------------------------------------------------

/// TOML subset:
///   A = "a.mtx"          # required, Matrix Market
///   B = "b.csv"          # required, .csv / .bin / .mtx
///   C = "c.csv"          # optional, identity when absent
///   r = 2                # optional consistency check on B's columns
///   [solver]
///   name = "ssm"         # ssm | pg | rgd
///   tol = 1e-8, max_iter = 100, seed = 0, step = "armijo" | "fixed", alpha = 0.1
/// Paths are relative to the file. Throws FormatError.
struct ProblemFile {
  std::string A, B, C;
  std::optional<Index> r;
  std::string solver = "ssm";
  std::optional<double> tol;
  std::optional<int> max_iter;
  std::uint64_t seed = 0;
  std::string step = "armijo";
  double alpha = 0.0;
};

ProblemFile read_problem_file(const std::string& path);
QuadraticProblem load_problem(const ProblemFile& pf);

// Reports -------------------------------------------------------------------

nlohmann::json to_json(const QualifiedCertificate& c);
nlohmann::json to_json(const SolveReport& r);
nlohmann::json to_json(const ClassificationResult& r);
void write_json(const std::string& path, const nlohmann::json& j);

struct BenchRow {
  std::string dataset;
  std::string solver;
  std::uint64_t seed = 0;
  double objective = 0.0;
  double residual = 0.0;
  long cg_evaluations = 0;
  double runtime_s = 0.0;
  int iterations = 0;
  std::optional<double> accuracy;
};

void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows);

/// One line per iteration: dataset,solver,seed,k,objective,grad_norm.
struct PlotSeries {
  std::string dataset;
  std::string solver;
  std::uint64_t seed = 0;
  std::vector<IterationRecord> iterations;
};
void write_plot_data(const std::string& path, const std::vector<PlotSeries>& series);

}  // namespace ssm::io
