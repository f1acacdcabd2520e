#include "mepp/linalg.hpp"

#include "mepp/error.hpp"

namespace mepp {

Vector solve_sparse(const SparseMatrix& A, const Vector& b, const char* what) {
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(A);
  lu.factorize(A);
  if (lu.info() != Eigen::Success)
    fail(ErrorKind::domain, std::string(what) + ": singular linear system");
  Vector x = lu.solve(b);
  if (lu.info() != Eigen::Success || !x.allFinite())
    fail(ErrorKind::domain, std::string(what) + ": linear solve failed");
  return x;
}

Vector flatten(const State& s) {
  const std::size_t n = s.n_cells();
  Vector v(static_cast<Eigen::Index>(s.dof()));
  for (std::size_t k = 0; k < s.size(); ++k)
    for (std::size_t i = 0; i < n; ++i)
      v[static_cast<Eigen::Index>(k * n + i)] = s[k][i];
  return v;
}

State unflatten(const Vector& v, const State& like) {
  State out = like;
  const std::size_t n = like.n_cells();
  for (std::size_t k = 0; k < like.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i)
      out[k][i] = v[static_cast<Eigen::Index>(k * n + i)];
  }
  return out;
}

SparseMatrix divergence_matrix(const Grid1D& g) {
  const auto n = static_cast<int>(g.n_cells());
  const double inv_dx = 1.0 / g.dx();
  Triplets t;
  for (int i = 0; i < n; ++i) {
    int right = i + 1;
    if (g.kind() == Boundary::periodic && right == n) right = 0;
    const bool right_zero = g.kind() == Boundary::no_flux && right == n;
    const bool left_zero = g.kind() == Boundary::no_flux && i == 0;
    if (!right_zero) t.emplace_back(i, right, inv_dx);
    if (!left_zero) t.emplace_back(i, i, -inv_dx);
  }
  SparseMatrix D(n, n + 1);
  D.setFromTriplets(t.begin(), t.end());
  return D;
}

SparseMatrix gradient_matrix(const Grid1D& g) {
  const auto n = static_cast<int>(g.n_cells());
  const double inv_dx = 1.0 / g.dx();
  Triplets t;
  for (int f = 1; f < n; ++f) {
    t.emplace_back(f, f, inv_dx);
    t.emplace_back(f, f - 1, -inv_dx);
  }
  switch (g.kind()) {
    case Boundary::periodic:
      t.emplace_back(0, 0, inv_dx);
      t.emplace_back(0, n - 1, -inv_dx);
      t.emplace_back(n, 0, inv_dx);
      t.emplace_back(n, n - 1, -inv_dx);
      break;
    case Boundary::no_flux: break;
    case Boundary::dirichlet:
      t.emplace_back(0, 0, 2.0 * inv_dx);
      t.emplace_back(n, n - 1, -2.0 * inv_dx);
      break;
  }
  SparseMatrix G(n + 1, n);
  G.setFromTriplets(t.begin(), t.end());
  return G;
}

}  // namespace mepp
