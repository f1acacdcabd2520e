#include "mepp/metrics.hpp"

#include <cmath>

#include "mepp/error.hpp"

namespace mepp {

const char* to_string(FaceMean m) {
  switch (m) {
    case FaceMean::arithmetic: return "arithmetic";
    case FaceMean::log_mean: return "log_mean";
    case FaceMean::geometric: return "geometric";
  }
  return "?";
}

const char* to_string(MetricOp::Variant v) {
  switch (v) {
    case MetricOp::Variant::l2m: return "l2m";
    case MetricOp::Variant::wasserstein: return "wasserstein";
    case MetricOp::Variant::coupled: return "coupled";
  }
  return "?";
}

double face_mean(FaceMean rule, double a, double b) {
  if (rule != FaceMean::arithmetic) {
    if (!(a >= 0.0) || !(b >= 0.0))
      fail(ErrorKind::domain, std::string(to_string(rule)) +
                                  " face mean needs nonnegative values, got " +
                                  format_double(a) + ", " + format_double(b));
    if (a == 0.0 || b == 0.0) return 0.0;
  }
  switch (rule) {
    case FaceMean::arithmetic: return 0.5 * (a + b);
    case FaceMean::geometric: return std::sqrt(a * b);
    case FaceMean::log_mean:
      if (std::abs(b - a) <= 1e-12 * std::abs(a)) return a;
      return (b - a) / (std::log(b) - std::log(a));
  }
  return 0.0;
}

FluxField face_mobility(FaceMean rule, const Field& z) {
  const Grid1D& g = z.grid();
  const std::size_t n = g.n_cells();
  std::vector<double> out(n + 1);
  for (std::size_t f = 1; f < n; ++f) out[f] = face_mean(rule, z[f - 1], z[f]);
  switch (g.kind()) {
    case Boundary::periodic:
      out[0] = out[n] = face_mean(rule, z[n - 1], z[0]);
      break;
    case Boundary::no_flux:
      out[0] = z[0];
      out[n] = z[n - 1];
      break;
    case Boundary::dirichlet: {
      const Wall w = z.wall();
      out[0] = face_mean(rule, w.left, z[0]);
      out[n] = face_mean(rule, z[n - 1], w.right);
      break;
    }
  }
  return FluxField(g, std::move(out));
}

bool is_spd(const HBlock& H) noexcept {
  if (!std::isfinite(H.u) || !std::isfinite(H.c) || !std::isfinite(H.uc))
    return false;
  return H.u > 0.0 && H.c > 0.0 && H.u * H.c - H.uc * H.uc > 0.0;
}

MBlock invert_H_blocks(const HBlock& H) {
  if (!is_spd(H))
    fail(ErrorKind::domain, "resistivity block is not symmetric positive definite");
  const double schur_u = H.u - H.uc * H.uc / H.c;
  const double schur_c = H.c - H.uc * H.uc / H.u;
  MBlock M;
  M.u = 0.5 / schur_u;
  M.c = 0.5 / schur_c;
  M.uc = -0.5 / schur_u * H.uc / H.c;
  return M;
}

// --- construction ----------------------------------------------------------

MetricOp MetricOp::l2m(CellMobility m) {
  MetricOp K;
  K.variant_ = Variant::l2m;
  K.cell_ = std::move(m);
  return K;
}

MetricOp MetricOp::wasserstein(FaceMobility M) {
  MetricOp K;
  K.variant_ = Variant::wasserstein;
  K.face_ = std::move(M);
  return K;
}

MetricOp MetricOp::coupled(Blocks H) {
  MetricOp K;
  K.variant_ = Variant::coupled;
  K.blocks_ = std::move(H);
  return K;
}

MetricOp MetricOp::l2m_constant(double m) {
  return l2m([m](const State& z, std::size_t) { return Field(z.grid(), m); });
}

MetricOp MetricOp::wasserstein_constant(double M) {
  return wasserstein(
      [M](const State& z, std::size_t) { return FluxField(z.grid(), M); });
}

MetricOp MetricOp::wasserstein_state(double scale, FaceMean rule) {
  return wasserstein([scale, rule](const State& z, std::size_t k) {
    const FluxField base = mepp::face_mobility(rule, z[k]);
    std::vector<double> v(base.values().begin(), base.values().end());
    for (double& x : v) x *= scale;
    return FluxField(z.grid(), std::move(v));
  });
}

MetricOp MetricOp::coupled_constant(HBlock H) {
  if (!is_spd(H))
    fail(ErrorKind::domain, "resistivity block is not symmetric positive definite");
  return coupled([H](const State& z) {
    return std::vector<HBlock>(z.n_cells(), H);
  });
}

bool MetricOp::is_conserved(std::size_t component) const noexcept {
  switch (variant_) {
    case Variant::l2m: return false;
    case Variant::wasserstein: return true;
    case Variant::coupled: return component == 1;
  }
  return false;
}

void MetricOp::check_components(const State& z) const {
  if (z.size() == 0) fail(ErrorKind::usage, "metric: empty state");
  if (variant_ == Variant::coupled) {
    if (z.size() != 2)
      fail(ErrorKind::usage, "coupled metric needs (non-conserved, conserved) state");
    if (!z.grid().closed())
      fail(ErrorKind::unsupported, "coupled metric needs a closed grid");
  }
}

// --- mobilities --------------------------------------------------------------

Field MetricOp::cell_mobility(const State& z, std::size_t k) const {
  if (variant_ != Variant::l2m) fail(ErrorKind::usage, "cell mobility: not an l2m metric");
  Field m = cell_(z, k);
  for (std::size_t i = 0; i < m.size(); ++i)
    if (!(m[i] >= 0.0) || !std::isfinite(m[i]))
      fail(ErrorKind::domain, "negative or non-finite mobility at cell " +
                                  std::to_string(i));
  return m;
}

FluxField MetricOp::face_mobility(const State& z, std::size_t k) const {
  if (variant_ != Variant::wasserstein)
    fail(ErrorKind::usage, "face mobility: not a wasserstein metric");
  FluxField M = face_(z, k);
  const Grid1D& g = z.grid();
  for (std::size_t f = g.first_active_face(); f < g.end_active_face(); ++f)
    if (!(M[f] >= 0.0) || !std::isfinite(M[f]))
      fail(ErrorKind::domain, "negative or non-finite mobility at face " +
                                  std::to_string(f));
  return M;
}

std::vector<HBlock> MetricOp::resistivity_blocks(const State& z) const {
  if (variant_ != Variant::coupled) fail(ErrorKind::usage, "not a coupled metric");
  std::vector<HBlock> H = blocks_(z);
  if (H.size() != z.n_cells())
    fail(ErrorKind::usage, "coupled metric: one block per cell expected");
  for (std::size_t i = 0; i < H.size(); ++i) {
    const bool ok = paired(z.grid(), i) ? is_spd(H[i])
                                        : (H[i].u > 0.0 && std::isfinite(H[i].u));
    if (!ok)
      fail(ErrorKind::domain,
           "resistivity block not positive definite at cell " + std::to_string(i));
  }
  return H;
}

std::vector<MBlock> MetricOp::mobility_blocks(const State& z) const {
  const std::vector<HBlock> H = resistivity_blocks(z);
  std::vector<MBlock> M(H.size());
  for (std::size_t i = 0; i < H.size(); ++i) {
    if (paired(z.grid(), i)) {
      M[i] = invert_H_blocks(H[i]);
    } else {
      M[i].u = 0.5 / H[i].u;
    }
  }
  return M;
}

// --- action ----------------------------------------------------------------

State MetricOp::apply(const State& z, const State& F) const {
  check_components(z);
  if (F.size() != z.size()) fail(ErrorKind::usage, "apply_K: component mismatch");
  require_same_grid(z.grid(), F.grid(), "apply_K");
  const Grid1D& g = z.grid();
  State out = F.zeros_like();
  switch (variant_) {
    case Variant::l2m:
      for (std::size_t k = 0; k < z.size(); ++k) {
        const Field m = cell_mobility(z, k);
        for (std::size_t i = 0; i < g.n_cells(); ++i) out[k][i] = m[i] * F[k][i];
      }
      break;
    case Variant::wasserstein:
      for (std::size_t k = 0; k < z.size(); ++k) {
        out[k] = divergence(multiply(face_mobility(z, k), gradient(F[k])));
        out[k] *= -1.0;
      }
      break;
    case Variant::coupled: {
      const std::vector<MBlock> M = mobility_blocks(z);
      const FluxField grad_c = gradient(F[1]);
      FluxField J(g, 0.0);
      for (std::size_t i = 0; i < g.n_cells(); ++i) {
        if (paired(g, i)) {
          out[0][i] = M[i].u * F[0][i] + M[i].uc * grad_c[i];
          J.set(i, M[i].uc * F[0][i] + M[i].c * grad_c[i]);
        } else {
          out[0][i] = M[i].u * F[0][i];
        }
      }
      out[1] = divergence(J);
      out[1] *= -1.0;
      break;
    }
  }
  return out;
}

namespace {

constexpr double kMeanTolerance = 1e-8;

// Flux with v = -div J, J_0 = 0. Throws when the total of v is not zero on a
// no_flux grid.
std::vector<double> flux_from_velocity(const Field& v, const char* what) {
  const Grid1D& g = v.grid();
  const std::size_t n = g.n_cells();
  const double dx = g.dx();
  std::vector<double> J(n + 1, 0.0);
  double abs_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    J[i + 1] = J[i] - v[i] * dx;
    abs_total += std::abs(v[i]) * dx;
  }
  if (std::abs(J[n]) > kMeanTolerance * abs_total)
    fail(ErrorKind::range, std::string(what) +
                               ": conserved component has nonzero total " +
                               format_double(-J[n]) + " (not in the range of K)");
  J[n] = 0.0;
  return J;
}

constexpr double kZeroTolerance = 1e-12;

}  // namespace

double MetricOp::kinv_norm_sq(const State& z, const State& v) const {
  check_components(z);
  if (v.size() != z.size()) fail(ErrorKind::usage, "kinv_norm_sq: component mismatch");
  require_same_grid(z.grid(), v.grid(), "kinv_norm_sq");
  const Grid1D& g = z.grid();
  const std::size_t n = g.n_cells();
  const double dx = g.dx();
  const double scale = max_abs(v);

  double total = 0.0;
  switch (variant_) {
    case Variant::l2m:
      for (std::size_t k = 0; k < z.size(); ++k) {
        const Field m = cell_mobility(z, k);
        for (std::size_t i = 0; i < n; ++i) {
          if (m[i] > 0.0) {
            total += v[k][i] * v[k][i] / m[i] * dx;
          } else if (std::abs(v[k][i]) > kZeroTolerance * scale) {
            fail(ErrorKind::domain, "kinv_norm_sq: velocity nonzero at zero-mobility cell " +
                                        std::to_string(i));
          }
        }
      }
      return total;

    case Variant::wasserstein:
      if (!g.closed()) {
        const SparseMatrix A = assemble(z);
        const Vector rhs = flatten(v);
        const Vector p = solve_sparse(A, rhs, "kinv_norm_sq");
        return p.dot(rhs) * dx;
      }
      for (std::size_t k = 0; k < z.size(); ++k) {
        const FluxField M = face_mobility(z, k);
        std::vector<double> J = flux_from_velocity(v[k], "kinv_norm_sq");
        if (g.kind() == Boundary::periodic) {
          // J is fixed up to a constant; pick the minimizer of sum J^2 / M.
          double shift = 0.0;
          bool pinned = false;
          for (std::size_t f = 0; f < n; ++f)
            if (!(M[f] > 0.0)) {
              shift = -J[f];
              pinned = true;
              break;
            }
          if (!pinned) {
            double num = 0.0, den = 0.0;
            for (std::size_t f = 0; f < n; ++f) {
              num += J[f] / M[f];
              den += 1.0 / M[f];
            }
            shift = -num / den;
          }
          for (std::size_t f = 0; f < n; ++f) J[f] += shift;
        }
        const double jscale = scale * g.length();
        for (std::size_t f = g.first_active_face(); f < g.end_active_face(); ++f) {
          if (M[f] > 0.0) {
            total += J[f] * J[f] / M[f] * dx;
          } else if (std::abs(J[f]) > kZeroTolerance * jscale) {
            fail(ErrorKind::domain,
                 "kinv_norm_sq: flux nonzero at zero-mobility face " + std::to_string(f));
          }
        }
      }
      return total;

    case Variant::coupled: {
      const std::vector<HBlock> H = resistivity_blocks(z);
      std::vector<double> J = flux_from_velocity(v[1], "kinv_norm_sq");
      if (g.kind() == Boundary::periodic) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          num += H[i].uc * v[0][i] + H[i].c * J[i];
          den += H[i].c;
        }
        const double shift = -num / den;
        for (std::size_t i = 0; i < n; ++i) J[i] += shift;
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double a = v[0][i];
        if (paired(g, i)) {
          const double b = J[i];
          total += 2.0 * (H[i].u * a * a + 2.0 * H[i].uc * a * b + H[i].c * b * b) * dx;
        } else {
          total += 2.0 * H[i].u * a * a * dx;
        }
      }
      return total;
    }
  }
  return total;
}

SparseMatrix MetricOp::assemble(const State& z) const {
  check_components(z);
  const Grid1D& g = z.grid();
  const auto n = static_cast<int>(g.n_cells());
  const auto dof = static_cast<Eigen::Index>(z.dof());
  Triplets t;
  auto add_block = [&t](const SparseMatrix& B, int row0, int col0) {
    for (int col = 0; col < B.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(B, col); it; ++it)
        t.emplace_back(row0 + static_cast<int>(it.row()),
                       col0 + static_cast<int>(it.col()), it.value());
  };
  const SparseMatrix D = divergence_matrix(g);
  const SparseMatrix G = gradient_matrix(g);

  switch (variant_) {
    case Variant::l2m:
      for (std::size_t k = 0; k < z.size(); ++k) {
        const Field m = cell_mobility(z, k);
        for (int i = 0; i < n; ++i)
          t.emplace_back(static_cast<int>(k) * n + i, static_cast<int>(k) * n + i,
                         m[static_cast<std::size_t>(i)]);
      }
      break;
    case Variant::wasserstein:
      for (std::size_t k = 0; k < z.size(); ++k) {
        const FluxField M = face_mobility(z, k);
        SparseMatrix Md(n + 1, n + 1);
        Triplets d;
        for (int f = 0; f <= n; ++f) d.emplace_back(f, f, M[static_cast<std::size_t>(f)]);
        Md.setFromTriplets(d.begin(), d.end());
        const SparseMatrix block = -(D * Md * G);
        add_block(block, static_cast<int>(k) * n, static_cast<int>(k) * n);
      }
      break;
    case Variant::coupled: {
      const std::vector<MBlock> M = mobility_blocks(z);
      Triplets tu, tr, tc, ts;
      for (int i = 0; i < n; ++i) {
        const MBlock& b = M[static_cast<std::size_t>(i)];
        tu.emplace_back(i, i, b.u);
        if (paired(g, static_cast<std::size_t>(i))) {
          tr.emplace_back(i, i, b.uc);  // cell i <- face i
          ts.emplace_back(i, i, b.uc);  // face i <- cell i
          tc.emplace_back(i, i, b.c);
        }
      }
      SparseMatrix Mu(n, n), R(n, n + 1), S(n + 1, n), Mc(n + 1, n + 1);
      Mu.setFromTriplets(tu.begin(), tu.end());
      R.setFromTriplets(tr.begin(), tr.end());
      S.setFromTriplets(ts.begin(), ts.end());
      Mc.setFromTriplets(tc.begin(), tc.end());
      add_block(Mu, 0, 0);
      add_block(SparseMatrix(R * G), 0, n);
      add_block(SparseMatrix(-(D * S)), n, 0);
      add_block(SparseMatrix(-(D * Mc * G)), n, n);
      break;
    }
  }
  SparseMatrix A(dof, dof);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

}  // namespace mepp
