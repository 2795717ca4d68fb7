#include "ssm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "ssm/errors.hpp"

namespace ssm {

namespace {

Csr from_entries(Index rows, Index cols, const std::vector<Triplet>& t) {
  Csr S(rows, cols);
  S.setFromTriplets(t.begin(), t.end());
  S.makeCompressed();
  return S;
}

}  // namespace

WeightedGraph WeightedGraph::from_weights(Csr W) {
  if (W.rows() != W.cols()) throw InvalidArgument("weight matrix must be square");
  W.makeCompressed();
  const Csr Wt = W.transpose();
  if ((W - Wt).norm() > 1e-12 * std::max(1.0, W.norm()))
    throw SymmetryViolation("weight matrix is not symmetric");
  for (Index i = 0; i < W.outerSize(); ++i)
    for (Csr::InnerIterator it(W, i); it; ++it) {
      if (!(it.value() >= 0.0)) throw InvalidArgument("negative or non-finite edge weight");
      if (it.col() == i && it.value() != 0.0) throw InvalidArgument("weight matrix has self loops");
    }
  WeightedGraph G;
  G.W = std::move(W);
  G.W.prune(0.0);
  G.degree = G.W * Vector::Ones(G.W.cols());
  return G;
}

WeightedGraph WeightedGraph::from_laplacian(const Csr& L) {
  std::vector<Triplet> t;
  for (Index i = 0; i < L.outerSize(); ++i)
    for (Csr::InnerIterator it(L, i); it; ++it)
      if (it.col() != i && it.value() != 0.0) t.emplace_back(i, it.col(), -it.value());
  return from_weights(from_entries(L.rows(), L.cols(), t));
}

WeightedGraph knn_gaussian_graph(const Matrix& points, Index k) {
  const Index n = points.rows();
  if (k < 1) throw InvalidArgument("k must be at least 1");
  if (n < 2 || k >= n) throw InvalidArgument("k-NN graph needs more than k points");
  const auto nbrs = kernels::knn(points, static_cast<std::size_t>(k));
  std::vector<Triplet> t;
  t.reserve(static_cast<size_t>(2 * n * k));
  for (Index i = 0; i < n; ++i) {
    const auto& row = nbrs[static_cast<size_t>(i)];
    if (row.front().dist2 <= 1e-24)
      throw DegenerateInstance("duplicate points " + std::to_string(i) + " and " +
                               std::to_string(row.front().index));
    const double dk2 = row.back().dist2;
    for (const auto& nb : row) {
      const double w = std::exp(-4.0 * nb.dist2 / dk2);
      t.emplace_back(i, nb.index, 0.5 * w);
      t.emplace_back(nb.index, i, 0.5 * w);
    }
  }
  return WeightedGraph::from_weights(from_entries(n, n, t));
}

SparseSymOperator laplacian(const WeightedGraph& G) {
  std::vector<Triplet> t;
  t.reserve(static_cast<size_t>(G.W.nonZeros() + G.size()));
  for (Index i = 0; i < G.W.outerSize(); ++i) {
    for (Csr::InnerIterator it(G.W, i); it; ++it) t.emplace_back(i, it.col(), -it.value());
    t.emplace_back(i, i, G.degree(i));
  }
  return SparseSymOperator(from_entries(G.size(), G.size(), t));
}

double conductance(const WeightedGraph& G, const std::vector<Index>& S) {
  const Index n = G.size();
  std::vector<char> in(static_cast<size_t>(n), 0);
  Index count = 0;
  for (Index v : S) {
    if (v < 0 || v >= n) throw InvalidArgument("vertex out of range in conductance");
    if (!in[v]) ++count;
    in[v] = 1;
  }
  if (count == 0 || count == n) throw InvalidArgument("conductance undefined for empty or full set");
  double cut = 0.0, vol_s = 0.0, vol_c = 0.0;
  for (Index i = 0; i < n; ++i) {
    (in[i] ? vol_s : vol_c) += G.degree(i);
    if (!in[i]) continue;
    for (Csr::InnerIterator it(G.W, i); it; ++it)
      if (!in[it.col()]) cut += it.value();
  }
  const double denom = std::min(vol_s, vol_c);
  if (denom <= 0.0) throw InvalidArgument("conductance undefined for a set of zero volume");
  return cut / denom;
}

std::vector<Index> connected_components(const WeightedGraph& G) {
  const Index n = G.size();
  std::vector<Index> comp(static_cast<size_t>(n), -1);
  Index next = 0;
  for (Index s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    std::deque<Index> queue{s};
    comp[s] = next;
    while (!queue.empty()) {
      const Index v = queue.front();
      queue.pop_front();
      for (Csr::InnerIterator it(G.W, v); it; ++it)
        if (comp[it.col()] < 0) {
          comp[it.col()] = next;
          queue.push_back(it.col());
        }
    }
    ++next;
  }
  return comp;
}

std::vector<Index> balanced_cardinalities(Index m, int r) {
  if (r < 1 || m < 0) throw InvalidArgument("balanced_cardinalities: need r >= 1, m >= 0");
  // Every class has the same fractional part, so the remainder goes to the first classes.
  std::vector<Index> c(static_cast<size_t>(r), m / r);
  for (Index i = 0; i < m % r; ++i) ++c[i];
  return c;
}

RankReduction rank_reduce(const Matrix& C) {
  if (C.rows() != C.cols() || C.rows() == 0) throw InvalidArgument("rank_reduce: C must be square");
  const EigPairs eig = dense_sym_eig(sym(C));
  const double top = eig.values.maxCoeff();
  if (!(top > 0.0)) throw DegenerateInstance("C has no positive eigenvalue (r' = 0)");
  std::vector<Index> keep;
  for (Index i = 0; i < eig.values.size(); ++i)
    if (eig.values(i) > 1e-10 * top) keep.push_back(i);
  RankReduction out;
  out.Q.resize(C.rows(), static_cast<Index>(keep.size()));
  out.C_diag.resize(static_cast<Index>(keep.size()));
  for (size_t j = 0; j < keep.size(); ++j) {
    Vector q = eig.vectors.col(keep[j]);
    Index lead = 0;
    while (lead < q.size() && std::abs(q(lead)) <= 1e-12) ++lead;
    if (lead < q.size() && q(lead) < 0) q = -q;
    out.Q.col(static_cast<Index>(j)) = q;
    out.C_diag(static_cast<Index>(j)) = eig.values(keep[j]);
  }
  return out;
}

SemiSupInstance assemble(const SparseSymOperator& Lop, const std::vector<Label>& labels,
                         const std::vector<Index>& c) {
  const Csr& L = Lop.sparse();
  if (Lop.has_correction()) throw InvalidArgument("assemble expects a plain sparse Laplacian");
  const Index total = L.rows();
  const int r = static_cast<int>(c.size());
  if (r < 1) throw CardinalityError("cardinality vector is empty");

  SemiSupInstance inst;
  inst.r = r;
  inst.L = L;
  std::vector<int> cls_of(static_cast<size_t>(total), -1);
  for (const Label& lab : labels) {
    if (lab.vertex < 0 || lab.vertex >= total) throw InvalidArgument("labeled vertex out of range");
    if (lab.cls < 0 || lab.cls >= r) throw InvalidArgument("label class out of range");
    if (cls_of[lab.vertex] >= 0) throw InvalidArgument("vertex labeled twice");
    cls_of[lab.vertex] = lab.cls;
  }
  std::vector<Index> pos(static_cast<size_t>(total));
  for (Index v = 0; v < total; ++v) {
    auto& list = cls_of[v] >= 0 ? inst.labeled : inst.unlabeled;
    pos[v] = static_cast<Index>(list.size());
    list.push_back(v);
  }
  const Index m = inst.m();
  const Index n = inst.n();

  inst.X_l = Matrix::Zero(m, r);
  for (Index i = 0; i < m; ++i) {
    inst.labeled_cls.push_back(cls_of[inst.labeled[i]]);
    inst.X_l(i, cls_of[inst.labeled[i]]) = 1.0;
  }
  inst.c.resize(r);
  Index sum = 0;
  for (int j = 0; j < r; ++j) {
    inst.c(j) = static_cast<double>(c[j]);
    sum += c[j];
  }
  inst.c_u = inst.c - inst.X_l.colwise().sum().transpose();
  if (sum != total) throw CardinalityError("cardinalities sum to " + std::to_string(sum) +
                                           ", graph has " + std::to_string(total) + " vertices");
  if ((inst.c_u.array() < 0).any())
    throw CardinalityError("a class has more labeled vertices than its cardinality");
  if (n < r) throw CardinalityError("fewer unlabeled vertices than classes");

  std::vector<Triplet> ll, lu, ul, uu;
  for (Index i = 0; i < L.outerSize(); ++i)
    for (Csr::InnerIterator it(L, i); it; ++it) {
      const bool li = cls_of[i] >= 0, lj = cls_of[it.col()] >= 0;
      auto& dst = li ? (lj ? ll : lu) : (lj ? ul : uu);
      dst.emplace_back(pos[i], pos[it.col()], it.value());
    }
  inst.L_ll = from_entries(m, m, ll);
  inst.L_lu = from_entries(m, n, lu);
  inst.L_ul = from_entries(n, m, ul);
  inst.L_uu = from_entries(n, n, uu);

  inst.Z0 = Vector::Ones(n) * inst.c_u.transpose() / static_cast<double>(n);

  // P L_uu P = L_uu + U M U^T with U = [1, w], w = L_uu 1, s = 1^T w.
  const Vector ones = Vector::Ones(n);
  const Vector w = inst.L_uu * ones;
  const double s = w.sum();
  const double nn = static_cast<double>(n);
  Matrix U(n, 2);
  U << ones, w;
  Matrix M(2, 2);
  M << s / (nn * nn), -1.0 / nn, -1.0 / nn, 0.0;
  inst.A = SparseSymOperator(inst.L_uu).with_correction(U, M);

  const Matrix Luu_Z0 = inst.L_uu * inst.Z0;
  const Matrix Lul_Xl = inst.L_ul * inst.X_l;
  const Matrix R = Luu_Z0 + Lul_Xl;
  inst.B = R.rowwise() - R.colwise().mean();
  inst.C = Matrix(inst.c.asDiagonal()) - inst.X_l.transpose() * inst.X_l -
           inst.Z0.transpose() * inst.Z0;
  inst.C = sym(inst.C);

  try {
    inst.reduction = rank_reduce(inst.C);
  } catch (const DegenerateInstance&) {
    throw CardinalityError("cardinalities leave no freedom for the unlabeled vertices (r' = 0)");
  }
  if (n <= inst.reduction.r_prime())
    throw CardinalityError("too few unlabeled vertices for the reduced rank");

  inst.constant = inner(inst.Z0, Luu_Z0) + 2.0 * inner(inst.Z0, Lul_Xl) +
                  inner(inst.X_l, inst.L_ll * inst.X_l);
  return inst;
}

QuadraticProblem standard_problem(const SemiSupInstance& inst) {
  const RankReduction& red = inst.reduction;
  if (red.r_prime() == 0) throw DegenerateInstance("instance has r' = 0");
  const Matrix root = red.C_diag.cwiseSqrt().asDiagonal();
  Matrix B = -(inst.B * red.Q * root);
  Matrix C = red.C_diag.asDiagonal();
  const Matrix deflation = Vector::Ones(inst.n()) / std::sqrt(static_cast<double>(inst.n()));
  try {
    return QuadraticProblem::make(inst.A, B, C, std::nullopt, deflation);
  } catch (const ConvergenceFailure&) {
    if (inst.n() > 4000) throw;
    GroundOptions dense;
    dense.dense_limit = inst.n();
    return QuadraticProblem::make(inst.A, std::move(B), std::move(C), std::nullopt, deflation, dense);
  }
}

Matrix recover_unlabeled(const SemiSupInstance& inst, const Matrix& Z) {
  const RankReduction& red = inst.reduction;
  return Z * red.C_diag.cwiseSqrt().asDiagonal() * red.Q.transpose() + inst.Z0;
}

std::vector<int> row_argmax(const Matrix& X) {
  std::vector<int> out(static_cast<size_t>(X.rows()));
  for (Index i = 0; i < X.rows(); ++i) {
    int best = 0;
    for (Index j = 1; j < X.cols(); ++j)
      if (X(i, j) > X(i, best)) best = static_cast<int>(j);
    out[i] = best;
  }
  return out;
}

ClassificationResult classify(const SemiSupInstance& inst, const ClassifyOptions& opts,
                              const std::vector<int>& truth) {
  const Index total = inst.L.rows();
  if (!truth.empty() && static_cast<Index>(truth.size()) != total)
    throw InvalidArgument("ground truth must have one label per vertex");
  const QuadraticProblem P = standard_problem(inst);

  ClassificationResult res;
  if (opts.solver == ClassifySolver::Ssm) {
    res.report = ssm_solve(P, opts.ssm);
  } else {
    const BaselineOptions& b = opts.baseline;
    res.report = opts.solver == ClassifySolver::ProjectedGradient ? projected_gradient_solve(P, b)
                                                                   : riemannian_gd_solve(P, b);
  }
  const Matrix Z = res.report.final_point.matrix();
  res.objective = objective(P, Z);
  res.X_u = recover_unlabeled(inst, Z);

  res.labels.assign(static_cast<size_t>(total), -1);
  for (Index i = 0; i < inst.m(); ++i) res.labels[inst.labeled[i]] = inst.labeled_cls[i];
  const std::vector<int> pred = row_argmax(res.X_u);
  for (Index i = 0; i < inst.n(); ++i) res.labels[inst.unlabeled[i]] = pred[i];

  Matrix X = Matrix::Zero(total, inst.r);
  for (Index i = 0; i < inst.m(); ++i) X.row(inst.labeled[i]) = inst.X_l.row(i);
  for (Index i = 0; i < inst.n(); ++i) X.row(inst.unlabeled[i]) = res.X_u.row(i);
  res.laplacian_objective = inner(X, inst.L * X);

  if (!truth.empty() && inst.n() > 0) {
    Index hit = 0;
    for (Index v : inst.unlabeled) hit += res.labels[v] == truth[v];
    res.accuracy = static_cast<double>(hit) / static_cast<double>(inst.n());
  }

  const WeightedGraph G = WeightedGraph::from_laplacian(inst.L);
  for (int k = 0; k < inst.r; ++k) {
    std::vector<Index> S;
    for (Index v = 0; v < total; ++v)
      if (res.labels[v] == k) S.push_back(v);
    double phi = std::numeric_limits<double>::quiet_NaN();
    try {
      phi = conductance(G, S);
    } catch (const InvalidArgument&) {
    }
    res.class_conductance.push_back(phi);
  }

  const std::vector<Index> comp = connected_components(G);
  std::vector<char> has_label(static_cast<size_t>(total), 0);
  for (Index v : inst.labeled) has_label[comp[v]] = 1;
  for (Index v : inst.unlabeled)
    if (!has_label[comp[v]]) res.unreachable.push_back(v);
  if (!res.unreachable.empty())
    res.report.warnings.push_back(std::to_string(res.unreachable.size()) +
                                  " unlabeled vertices have no path to a labeled vertex");
  return res;
}

}  // namespace ssm
