#include "mepp/production.hpp"

#include <cmath>

#include "mepp/error.hpp"

namespace mepp {

namespace {

// Index map from faces to KKT unknowns on a closed grid.
struct FaceIndex {
  explicit FaceIndex(const Grid1D& g) : grid(g) {}

  std::size_t count() const { return grid.n_active_faces(); }
  bool active(std::size_t f) const {
    if (grid.kind() == Boundary::periodic) return true;
    return f >= 1 && f < grid.n_cells();
  }
  // offset of face f among the active faces (periodic face n maps to face 0)
  int slot(std::size_t f) const {
    if (grid.kind() == Boundary::periodic) return static_cast<int>(f % grid.n_cells());
    return static_cast<int>(f) - 1;
  }
  std::size_t face_of(int slot_index) const {
    return grid.kind() == Boundary::periodic ? static_cast<std::size_t>(slot_index)
                                             : static_cast<std::size_t>(slot_index) + 1;
  }

  const Grid1D& grid;
};

void require_closed(const Grid1D& g, const char* what) {
  if (!g.closed())
    fail(ErrorKind::unsupported,
         std::string(what) + ": conservation constraint needs a closed (periodic or no_flux) grid");
}

// Adds the constraint rows/columns for  -zdot_c - div J = 0  and the
// multiplier part of the flux rows (grad lambda). Symmetric by construction.
void add_constraint(Triplets& t, const Grid1D& g, const FaceIndex& faces,
                    int zdot_c0, int flux0, int lambda0) {
  const std::size_t n = g.n_cells();
  const double inv_dx = 1.0 / g.dx();
  for (std::size_t i = 0; i < n; ++i) {
    const int li = lambda0 + static_cast<int>(i);
    const int zi = zdot_c0 + static_cast<int>(i);
    t.emplace_back(li, zi, -1.0);
    t.emplace_back(zi, li, -1.0);
    // div J at cell i = (J_{i+1} - J_i) / dx
    if (faces.active(i + 1)) {
      const int fj = flux0 + faces.slot(i + 1);
      t.emplace_back(li, fj, -inv_dx);
      t.emplace_back(fj, li, -inv_dx);
    }
    if (faces.active(i)) {
      const int fj = flux0 + faces.slot(i);
      t.emplace_back(li, fj, inv_dx);
      t.emplace_back(fj, li, inv_dx);
    }
  }
}

}  // namespace

MeppSolution solve_unconstrained_forces(const State& forces, const Field& eta) {
  require_same_grid(forces.grid(), eta.grid(), "solve_unconstrained");
  const std::size_t n = forces.n_cells();
  for (std::size_t i = 0; i < n; ++i)
    if (!(eta[i] > 0.0) || !std::isfinite(eta[i]))
      fail(ErrorKind::domain, "solve_unconstrained: eta must be positive, cell " +
                                  std::to_string(i));
  // stationarity in zdot: DS - 2 eta zdot = 0
  const auto dof = static_cast<Eigen::Index>(forces.dof());
  Triplets t;
  Vector rhs(dof);
  for (std::size_t k = 0; k < forces.size(); ++k)
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = static_cast<int>(k * n + i);
      t.emplace_back(row, row, -2.0 * eta[i]);
      rhs[row] = -forces[k][i];
    }
  SparseMatrix A(dof, dof);
  A.setFromTriplets(t.begin(), t.end());
  const Vector x = solve_sparse(A, rhs, "solve_unconstrained");

  MeppSolution sol;
  sol.zdot = unflatten(x, forces);
  double penalty = 0.0;
  for (const Field& v : sol.zdot) penalty += inner_l2_weighted(v, v, eta);
  sol.lagrangian_value = inner(forces, sol.zdot) - penalty;
  return sol;
}

MeppSolution solve_unconstrained(const State& z, const EntropyFunctional& S,
                                 const Field& eta) {
  return solve_unconstrained_forces(S.variational_derivative(z), eta);
}

MeppSolution solve_conserved_forces(const Field& force, const FluxField& H) {
  const Grid1D& g = force.grid();
  require_same_grid(g, H.grid(), "solve_conserved");
  require_closed(g, "solve_conserved");
  const FaceIndex faces(g);
  const std::size_t n = g.n_cells();
  const std::size_t m = faces.count();
  for (std::size_t s = 0; s < m; ++s) {
    const std::size_t f = faces.face_of(static_cast<int>(s));
    if (!(H[f] > 0.0) || !std::isfinite(H[f]))
      fail(ErrorKind::domain, "solve_conserved: H must be positive, face " + std::to_string(f));
  }

  const int zdot0 = 0;
  const int flux0 = static_cast<int>(n);
  const int lambda0 = static_cast<int>(n + m);
  const auto dof = static_cast<Eigen::Index>(2 * n + m);
  Triplets t;
  Vector rhs = Vector::Zero(dof);
  // zdot rows: DS - lambda = 0
  for (std::size_t i = 0; i < n; ++i) rhs[zdot0 + static_cast<int>(i)] = -force[i];
  // flux rows: grad lambda - 2 H J = 0
  for (std::size_t s = 0; s < m; ++s) {
    const int row = flux0 + static_cast<int>(s);
    t.emplace_back(row, row, -2.0 * H[faces.face_of(static_cast<int>(s))]);
  }
  add_constraint(t, g, faces, zdot0, flux0, lambda0);

  SparseMatrix A(dof, dof);
  A.setFromTriplets(t.begin(), t.end());
  const Vector x = solve_sparse(A, rhs, "solve_conserved");

  MeppSolution sol;
  Field zdot(g), lambda(g);
  FluxField J(g, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    zdot[i] = x[zdot0 + static_cast<int>(i)];
    lambda[i] = x[lambda0 + static_cast<int>(i)];
  }
  for (std::size_t s = 0; s < m; ++s)
    J.set(faces.face_of(static_cast<int>(s)), x[flux0 + static_cast<int>(s)]);

  const Field residual = zdot + divergence(J);
  sol.lagrangian_value = inner(force, zdot) - inner(lambda, residual) -
                         inner(J, multiply(H, J));
  sol.zdot = State(std::move(zdot));
  sol.flux = std::move(J);
  sol.multiplier = std::move(lambda);
  return sol;
}

MeppSolution solve_conserved(const Field& z, const EntropyFunctional& S,
                             const FluxField& H) {
  require_closed(z.grid(), "solve_conserved");
  return solve_conserved_forces(S.variational_derivative(State(z))[0], H);
}

MeppSolution solve_coupled_forces(const State& forces,
                                  const std::vector<HBlock>& H) {
  if (forces.size() != 2)
    fail(ErrorKind::usage, "solve_coupled needs (non-conserved, conserved) forces");
  const Grid1D& g = forces.grid();
  require_closed(g, "solve_coupled");
  const std::size_t n = g.n_cells();
  if (H.size() != n) fail(ErrorKind::usage, "solve_coupled: one block per cell expected");
  for (std::size_t i = 0; i < n; ++i) {
    const bool ok = MetricOp::paired(g, i) ? is_spd(H[i]) : H[i].u > 0.0;
    if (!ok)
      fail(ErrorKind::domain,
           "solve_coupled: block not positive definite at cell " + std::to_string(i));
  }
  const FaceIndex faces(g);
  const std::size_t m = faces.count();

  const int u0 = 0;
  const int c0 = static_cast<int>(n);
  const int flux0 = static_cast<int>(2 * n);
  const int lambda0 = static_cast<int>(2 * n + m);
  const auto dof = static_cast<Eigen::Index>(3 * n + m);
  Triplets t;
  Vector rhs = Vector::Zero(dof);

  for (std::size_t i = 0; i < n; ++i) {
    const int ui = u0 + static_cast<int>(i);
    // zdot_u rows: DS_u - 2 (H_u zdot_u + H_uc J) = 0
    t.emplace_back(ui, ui, -2.0 * H[i].u);
    rhs[ui] = -forces[0][i];
    // zdot_c rows: DS_c - Lambda = 0 (the Lambda entry comes from add_constraint)
    rhs[c0 + static_cast<int>(i)] = -forces[1][i];
    if (MetricOp::paired(g, i)) {
      const int fi = flux0 + faces.slot(i);
      t.emplace_back(ui, fi, -2.0 * H[i].uc);
      t.emplace_back(fi, ui, -2.0 * H[i].uc);
      // flux rows: grad Lambda - 2 (H_uc zdot_u + H_c J) = 0
      t.emplace_back(fi, fi, -2.0 * H[i].c);
    }
  }
  add_constraint(t, g, faces, c0, flux0, lambda0);

  SparseMatrix A(dof, dof);
  A.setFromTriplets(t.begin(), t.end());
  const Vector x = solve_sparse(A, rhs, "solve_coupled");

  Field zu(g), zc(g), lambda(g);
  FluxField J(g, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    zu[i] = x[u0 + static_cast<int>(i)];
    zc[i] = x[c0 + static_cast<int>(i)];
    lambda[i] = x[lambda0 + static_cast<int>(i)];
  }
  for (std::size_t s = 0; s < m; ++s)
    J.set(faces.face_of(static_cast<int>(s)), x[flux0 + static_cast<int>(s)]);

  double penalty = 0.0;
  const double dx = g.dx();
  for (std::size_t i = 0; i < n; ++i) {
    const double a = zu[i];
    if (MetricOp::paired(g, i)) {
      const double b = J[i];
      penalty += (H[i].u * a * a + 2.0 * H[i].uc * a * b + H[i].c * b * b) * dx;
    } else {
      penalty += H[i].u * a * a * dx;
    }
  }
  MeppSolution sol;
  sol.zdot = State{zu, zc};
  sol.lagrangian_value = inner(forces, sol.zdot) -
                         inner(lambda, zc + divergence(J)) - penalty;
  sol.flux = std::move(J);
  sol.multiplier = std::move(lambda);
  return sol;
}

MeppSolution solve_coupled(const State& z, const EntropyFunctional& S,
                           const std::vector<HBlock>& H) {
  return solve_coupled_forces(S.variational_derivative(z), H);
}

FluxField onsager_flux(const FluxField& X, const FluxField& L) {
  require_same_grid(X.grid(), L.grid(), "onsager_flux");
  const Grid1D& g = X.grid();
  for (std::size_t f = g.first_active_face(); f < g.end_active_face(); ++f)
    if (!(L[f] >= 0.0))
      fail(ErrorKind::domain, "onsager_flux: negative conductivity at face " + std::to_string(f));
  return multiply(L, X);
}

}  // namespace mepp
