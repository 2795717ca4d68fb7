#include "ssm/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "ssm/errors.hpp"

namespace ssm::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ifstream open_in(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw FormatError("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error("cannot write " + path);
  out << std::setprecision(17);
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& tok, const std::string& where) {
  try {
    size_t used = 0;
    const double v = std::stod(tok, &used);
    if (trim(tok.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw FormatError(where + ": not a number: '" + tok + "'");
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(trim(tok));
  return out;
}

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError(path + ": truncated IDX header");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) | b[3];
}

std::uint32_t read_le32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError(path + ": truncated header");
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

void write_le32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

double nan_or(const std::optional<double>& v) {
  return v ? *v : std::numeric_limits<double>::quiet_NaN();
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

// Matrix Market ---------------------------------------------------------------

Csr read_matrix_market(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty file");
  std::istringstream head(lower(line));
  std::string banner, object, format, field, symmetry;
  head >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%matrixmarket" || object != "matrix")
    throw FormatError(path + ": missing %%MatrixMarket matrix header");
  if (format != "coordinate" && format != "array") throw FormatError(path + ": unknown format " + format);
  if (field != "real" && field != "integer" && field != "double" &&
      !(field == "pattern" && format == "coordinate"))
    throw FormatError(path + ": unsupported field " + field);
  if (symmetry != "general" && symmetry != "symmetric")
    throw FormatError(path + ": unsupported symmetry " + symmetry);
  const bool symmetric = symmetry == "symmetric";

  do {
    if (!std::getline(in, line)) throw FormatError(path + ": missing size line");
  } while (trim(line).empty() || trim(line)[0] == '%');
  std::istringstream size(line);
  long rows = -1, cols = -1, nnz = -1;
  size >> rows >> cols;
  if (format == "coordinate") size >> nnz;
  if (!size || rows < 0 || cols < 0 || (format == "coordinate" && nnz < 0))
    throw FormatError(path + ": bad size line");
  if (symmetric && rows != cols) throw FormatError(path + ": symmetric matrix must be square");

  std::vector<Triplet> t;
  auto add = [&](long i, long j, double v) {
    t.emplace_back(i, j, v);
    if (symmetric && i != j) t.emplace_back(j, i, v);
  };
  if (format == "coordinate") {
    t.reserve(static_cast<size_t>(symmetric ? 2 * nnz : nnz));
    for (long e = 0; e < nnz; ++e) {
      if (!(in >> std::ws) || !std::getline(in, line)) throw FormatError(path + ": truncated entries");
      if (line[0] == '%') { --e; continue; }
      std::istringstream es(line);
      long i = 0, j = 0;
      double v = 1.0;
      es >> i >> j;
      if (field != "pattern") es >> v;
      if (!es) throw FormatError(path + ": bad entry line '" + line + "'");
      if (i < 1 || i > rows || j < 1 || j > cols) throw FormatError(path + ": index out of range");
      if (!std::isfinite(v)) throw FormatError(path + ": non-finite value");
      add(i - 1, j - 1, v);
    }
  } else {
    for (long j = 0; j < cols; ++j)
      for (long i = symmetric ? j : 0; i < rows; ++i) {
        double v;
        if (!(in >> v)) throw FormatError(path + ": truncated array data");
        if (v != 0.0) add(i, j, v);
      }
  }
  Csr S(rows, cols);
  S.setFromTriplets(t.begin(), t.end());
  S.makeCompressed();
  return S;
}

SparseSymOperator read_operator(const std::string& path) {
  return SparseSymOperator(read_matrix_market(path));
}

void write_matrix_market(const std::string& path, const Csr& S, bool symmetric) {
  std::vector<Triplet> t;
  for (Index i = 0; i < S.outerSize(); ++i)
    for (Csr::InnerIterator it(S, i); it; ++it)
      if (!symmetric || it.col() <= i) t.emplace_back(i, it.col(), it.value());
  auto out = open_out(path);
  out << "%%MatrixMarket matrix coordinate real " << (symmetric ? "symmetric" : "general") << "\n";
  out << S.rows() << " " << S.cols() << " " << t.size() << "\n";
  for (const auto& e : t) out << e.row() + 1 << " " << e.col() + 1 << " " << e.value() << "\n";
}

// CSV / binary ----------------------------------------------------------------

Matrix read_csv(const std::string& path) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    for (const auto& tok : split_csv(line))
      row.push_back(parse_double(tok, path + ":" + std::to_string(lineno)));
    if (!rows.empty() && row.size() != rows.front().size())
      throw FormatError(path + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError(path + ": no data");
  Matrix M(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j) M(i, j) = rows[i][j];
  return M;
}

void write_csv(const std::string& path, const Matrix& M) {
  auto out = open_out(path);
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) out << (j ? "," : "") << M(i, j);
    out << "\n";
  }
}

Matrix read_binary(const std::string& path) {
  static_assert(std::endian::native == std::endian::little, "binary format assumes little endian");
  auto in = open_in(path, true);
  const std::uint32_t rows = read_le32(in, path);
  const std::uint32_t cols = read_le32(in, path);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> M(rows, cols);
  const auto bytes = static_cast<std::streamsize>(sizeof(double) * rows * cols);
  if (!in.read(reinterpret_cast<char*>(M.data()), bytes)) throw FormatError(path + ": truncated data");
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(path + ": trailing bytes");
  return M;
}

void write_binary(const std::string& path, const Matrix& M) {
  auto out = open_out(path, true);
  write_le32(out, static_cast<std::uint32_t>(M.rows()));
  write_le32(out, static_cast<std::uint32_t>(M.cols()));
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R = M;
  out.write(reinterpret_cast<const char*>(R.data()),
            static_cast<std::streamsize>(sizeof(double) * R.size()));
}

Matrix read_dense(const std::string& path) {
  const std::string ext = lower(fs::path(path).extension().string());
  if (ext == ".csv") return read_csv(path);
  if (ext == ".bin") return read_binary(path);
  if (ext == ".mtx") return Matrix(read_matrix_market(path));
  throw FormatError(path + ": unknown matrix file extension '" + ext + "'");
}

// IDX -------------------------------------------------------------------------

Matrix load_idx(const std::string& path) {
  auto in = open_in(path, true);
  const std::uint32_t magic = read_be32(in, path);
  if (magic != 0x00000803) throw FormatError(path + ": bad IDX image magic");
  const std::uint32_t count = read_be32(in, path);
  const std::uint32_t h = read_be32(in, path);
  const std::uint32_t w = read_be32(in, path);
  const size_t pixels = static_cast<size_t>(h) * w;
  std::vector<unsigned char> buf(pixels * count);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw FormatError(path + ": truncated IDX image data");
  Matrix M(count, static_cast<Index>(pixels));
  for (std::uint32_t i = 0; i < count; ++i)
    for (size_t p = 0; p < pixels; ++p) M(i, static_cast<Index>(p)) = buf[i * pixels + p] / 255.0;
  return M;
}

std::vector<int> load_idx_labels(const std::string& path) {
  auto in = open_in(path, true);
  if (read_be32(in, path) != 0x00000801) throw FormatError(path + ": bad IDX label magic");
  const std::uint32_t count = read_be32(in, path);
  std::vector<unsigned char> buf(count);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count)))
    throw FormatError(path + ": truncated IDX label data");
  return {buf.begin(), buf.end()};
}

std::vector<Label> read_labels_csv(const std::string& path) {
  auto in = open_in(path);
  std::vector<Label> out;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto tok = split_csv(line);
    if (tok.size() != 2) throw FormatError(path + ":" + std::to_string(lineno) + ": expected 2 fields");
    const std::string where = path + ":" + std::to_string(lineno);
    if (lineno == 1 && !tok[0].empty() && !std::isdigit(static_cast<unsigned char>(tok[0][0])))
      continue;  // header
    const double v = parse_double(tok[0], where);
    const double c = parse_double(tok[1], where);
    if (v < 0 || c < 0 || v != std::floor(v) || c != std::floor(c))
      throw FormatError(where + ": indices must be nonnegative integers");
    out.push_back({static_cast<Index>(v), static_cast<int>(c)});
  }
  return out;
}

// Datasets --------------------------------------------------------------------

Dataset gen_circles(std::uint64_t seed, Index n_per, const std::vector<double>& radii, double noise) {
  if (radii.empty() || n_per < 1) throw InvalidArgument("gen_circles: need radii and n_per >= 1");
  for (size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0)) throw InvalidArgument("gen_circles: radii must be positive");
    for (size_t j = 0; j < i; ++j)
      if (radii[i] == radii[j]) throw InvalidArgument("gen_circles: radii must be distinct");
  }
  if (!(noise >= 0)) throw InvalidArgument("gen_circles: noise must be nonnegative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Dataset d;
  d.points.resize(static_cast<Index>(radii.size()) * n_per, 2);
  Index row = 0;
  for (size_t c = 0; c < radii.size(); ++c)
    for (Index i = 0; i < n_per; ++i, ++row) {
      const double t = angle(rng);
      const double rad = radii[c] + noise * gauss(rng);
      d.points(row, 0) = rad * std::cos(t);
      d.points(row, 1) = rad * std::sin(t);
      d.labels.push_back(static_cast<int>(c));
    }
  return d;
}

void write_dataset_csv(const std::string& path, const Dataset& d) {
  auto out = open_out(path);
  for (Index i = 0; i < d.points.rows(); ++i) {
    for (Index j = 0; j < d.points.cols(); ++j) out << d.points(i, j) << ",";
    out << d.labels[i] << "\n";
  }
}

std::vector<Label> sample_labels(const std::vector<int>& truth, int r, Index labels_per_class,
                                 std::uint64_t seed) {
  std::vector<Index> idx(truth.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<Index> taken(static_cast<size_t>(r), 0);
  std::vector<Label> out;
  for (Index v : idx) {
    const int c = truth[v];
    if (c < 0 || c >= r) throw InvalidArgument("sample_labels: class out of range");
    if (taken[c] < labels_per_class) {
      ++taken[c];
      out.push_back({v, c});
    }
  }
  for (int c = 0; c < r; ++c)
    if (taken[c] < labels_per_class) throw InvalidArgument("sample_labels: class too small");
  std::sort(out.begin(), out.end(), [](const Label& a, const Label& b) { return a.vertex < b.vertex; });
  return out;
}

// Problem file ----------------------------------------------------------------

ProblemFile read_problem_file(const std::string& path) {
  auto in = open_in(path);
  const fs::path base = fs::path(path).parent_path();
  ProblemFile pf;
  std::string section, line;
  long lineno = 0;
  auto resolve = [&](const std::string& p) {
    const fs::path q(p);
    return (q.is_absolute() ? q : base / q).string();
  };
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = path + ":" + std::to_string(lineno);
    // Strip comments outside quotes.
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw FormatError(where + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "solver") throw FormatError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    const bool is_string = val.size() >= 2 && val.front() == '"' && val.back() == '"';
    if (is_string) val = val.substr(1, val.size() - 2);
    auto want_string = [&] {
      if (!is_string) throw FormatError(where + ": " + key + " must be a quoted string");
      return val;
    };
    auto want_number = [&] {
      if (is_string) throw FormatError(where + ": " + key + " must be a number");
      return parse_double(val, where);
    };
    auto want_int = [&] {
      const double v = want_number();
      if (v != std::floor(v) || v < 0) throw FormatError(where + ": " + key + " must be a nonnegative integer");
      return v;
    };
    if (section.empty()) {
      if (key == "A") pf.A = resolve(want_string());
      else if (key == "B") pf.B = resolve(want_string());
      else if (key == "C") pf.C = resolve(want_string());
      else if (key == "r") pf.r = static_cast<Index>(want_int());
      else throw FormatError(where + ": unknown key '" + key + "'");
    } else {
      if (key == "name") pf.solver = want_string();
      else if (key == "tol") pf.tol = want_number();
      else if (key == "max_iter") pf.max_iter = static_cast<int>(want_int());
      else if (key == "seed") pf.seed = static_cast<std::uint64_t>(want_int());
      else if (key == "step") pf.step = want_string();
      else if (key == "alpha") pf.alpha = want_number();
      else throw FormatError(where + ": unknown solver key '" + key + "'");
    }
  }
  if (pf.A.empty() || pf.B.empty()) throw FormatError(path + ": A and B are required");
  if (pf.solver != "ssm" && pf.solver != "pg" && pf.solver != "rgd")
    throw FormatError(path + ": unknown solver '" + pf.solver + "'");
  if (pf.step != "armijo" && pf.step != "fixed") throw FormatError(path + ": step must be armijo or fixed");
  return pf;
}

QuadraticProblem load_problem(const ProblemFile& pf) {
  SparseSymOperator A = read_operator(pf.A);
  Matrix B = read_dense(pf.B);
  Matrix C = pf.C.empty() ? Matrix::Identity(B.cols(), B.cols()) : read_dense(pf.C);
  if (pf.r && *pf.r != B.cols())
    throw FormatError("problem file says r = " + std::to_string(*pf.r) + " but B has " +
                      std::to_string(B.cols()) + " columns");
  if (B.rows() != A.dim()) throw FormatError("B has " + std::to_string(B.rows()) + " rows, A is " +
                                             std::to_string(A.dim()) + " x " + std::to_string(A.dim()));
  if (C.rows() != B.cols() || C.cols() != B.cols()) throw FormatError("C must be r x r");
  return QuadraticProblem::make(std::move(A), std::move(B), std::move(C));
}

// Reports ---------------------------------------------------------------------

namespace {

json matrix_json(const Matrix& M) {
  json rows = json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < M.cols(); ++j) row.push_back(number(M(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

json to_json(const QualifiedCertificate& c) {
  json j;
  j["qualified"] = c.qualified;
  j["global"] = c.global;
  j["safe_global"] = c.safe_global;
  j["prop_identity_c"] = c.prop_identity_c;
  j["residual"] = number(c.residual);
  j["sigma"] = number(c.sigma);
  j["d_1"] = number(c.d_1);
  j["d_r"] = number(c.d_r);
  j["gamma_max"] = number(c.gamma_max());
  j["safeguard_bound"] = number(c.safeguard_bound);
  j["gamma"] = std::vector<double>(c.gamma.data(), c.gamma.data() + c.gamma.size());
  j["Lambda"] = matrix_json(c.Lambda);
  return j;
}

json to_json(const SolveReport& r) {
  json j;
  j["solver"] = r.solver;
  j["termination"] = r.termination;
  j["objective"] = number(r.objective());
  j["steps"] = r.steps();
  j["evaluations"] = r.evaluations;
  j["wall_time_s"] = r.wall_time_s;
  j["certificate"] = to_json(r.certificate);
  j["warnings"] = r.warnings;
  json its = json::array();
  for (const auto& it : r.iterations)
    its.push_back({{"k", it.k},
                   {"f", number(it.f)},
                   {"grad_norm", number(it.grad_norm)},
                   {"gamma_max", number(it.gamma_max)},
                   {"cg_iters", it.cg_iters},
                   {"subspace_rank", it.subspace_rank},
                   {"surrogate_next", number(it.surrogate_next)},
                   {"f_next", number(it.f_next)},
                   {"multiplier_drift", number(it.multiplier_drift)}});
  j["iterations"] = std::move(its);
  j["final_point"] = matrix_json(r.final_point.matrix());
  return j;
}

json to_json(const ClassificationResult& r) {
  json j;
  j["labels"] = r.labels;
  j["accuracy"] = r.accuracy ? json(*r.accuracy) : json(nullptr);
  j["objective"] = number(r.objective);
  j["laplacian_objective"] = number(r.laplacian_objective);
  j["certificate"] = to_json(r.report.certificate);
  json phi = json::array();
  for (double v : r.class_conductance) phi.push_back(number(v));
  j["conductance"] = std::move(phi);
  j["unreachable"] = r.unreachable;
  j["solver"] = r.report.solver;
  j["termination"] = r.report.termination;
  j["steps"] = r.report.steps();
  j["warnings"] = r.report.warnings;
  return j;
}

void write_json(const std::string& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows) {
  auto out = open_out(path);
  out << "dataset,solver,seed,objective,residual,cg_evaluations,runtime_s,iterations,accuracy\n";
  for (const auto& r : rows) {
    out << r.dataset << "," << r.solver << "," << r.seed << "," << r.objective << "," << r.residual
        << "," << r.cg_evaluations << "," << r.runtime_s << "," << r.iterations << ",";
    if (r.accuracy) out << nan_or(r.accuracy);
    out << "\n";
  }
}

void write_plot_data(const std::string& path, const std::vector<PlotSeries>& series) {
  auto out = open_out(path);
  out << "dataset,solver,seed,k,objective,grad_norm\n";
  for (const auto& s : series)
    for (const auto& it : s.iterations)
      out << s.dataset << "," << s.solver << "," << s.seed << "," << it.k << "," << it.f << ","
          << it.grad_norm << "\n";
}

}  // namespace ssm::io
