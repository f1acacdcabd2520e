#include "mepp/functionals.hpp"

#include <algorithm>
#include <cmath>

#include "mepp/error.hpp"

namespace mepp {

namespace {

double well(double phi) { return phi * phi * (1.0 - phi) * (1.0 - phi); }
double well_prime(double phi) {
  return 2.0 * phi * (1.0 - phi) * (1.0 - 2.0 * phi);
}
double interp(double phi) { return phi * phi * (3.0 - 2.0 * phi); }
double interp_prime(double phi) { return 6.0 * phi * (1.0 - phi); }

// Cellwise average of the squared face gradients.
Field grad_sq_cells(const Field& phi) {
  const FluxField g = gradient(phi);
  Field out(phi.grid());
  for (std::size_t i = 0; i < phi.size(); ++i)
    out[i] = 0.5 * (g[i] * g[i] + g[i + 1] * g[i + 1]);
  return out;
}

// kappa * div(theta grad phi), theta = face average of 1/T.
Field gradient_force(const Field& phi, const Field& T, double kappa) {
  const Grid1D& grid = phi.grid();
  const FluxField g = gradient(phi);
  std::vector<double> flux(grid.n_faces(), 0.0);
  for (std::size_t f = 0; f < grid.n_faces(); ++f) {
    const double theta =
        0.5 * (1.0 / T[grid.left_cell(f)] + 1.0 / T[grid.right_cell(f)]);
    flux[f] = kappa * theta * g[f];
  }
  return divergence(FluxField(grid, std::move(flux)));
}

[[noreturn]] void bad_cell(const char* what, std::size_t comp, std::size_t i,
                           double v) {
  throw CellError(comp, i,
                  std::string(what) + " at component " + std::to_string(comp) +
                      ", cell " + std::to_string(i) + " (value " +
                      format_double(v) + ")");
}

}  // namespace

const char* to_string(EntropyFunctional::Variant v) {
  switch (v) {
    case EntropyFunctional::Variant::dirichlet: return "dirichlet";
    case EntropyFunctional::Variant::boltzmann: return "boltzmann";
    case EntropyFunctional::Variant::thermal: return "thermal";
    case EntropyFunctional::Variant::phase_field: return "phase_field";
  }
  return "?";
}

EntropyFunctional EntropyFunctional::dirichlet() {
  return {Variant::dirichlet, {}};
}

EntropyFunctional EntropyFunctional::boltzmann() {
  return {Variant::boltzmann, {}};
}

EntropyFunctional EntropyFunctional::thermal(double c_v) {
  if (!(c_v > 0.0) || !std::isfinite(c_v))
    fail(ErrorKind::domain, "thermal entropy needs c_v > 0");
  PhaseFieldParams p;
  p.c_v = c_v;
  return {Variant::thermal, p};
}

EntropyFunctional EntropyFunctional::phase_field(const PhaseFieldParams& p) {
  if (!(p.c_v > 0.0)) fail(ErrorKind::domain, "phase field needs c_v > 0");
  if (!(p.T_m > 0.0)) fail(ErrorKind::domain, "phase field needs T_m > 0");
  if (!(p.w >= 0.0)) fail(ErrorKind::domain, "phase field needs w >= 0");
  if (!(p.kappa >= 0.0)) fail(ErrorKind::domain, "phase field needs kappa >= 0");
  if (!std::isfinite(p.latent_heat))
    fail(ErrorKind::domain, "phase field latent heat must be finite");
  return {Variant::phase_field, p};
}

EntropyFunctional EntropyFunctional::phase_field_isothermal(
    const PhaseFieldParams& p, Field temperature) {
  EntropyFunctional s = phase_field(p);
  for (std::size_t i = 0; i < temperature.size(); ++i)
    if (!(temperature[i] > 0.0)) bad_cell("nonpositive temperature", 0, i, temperature[i]);
  s.frozen_T_ = std::move(temperature);
  return s;
}

std::size_t EntropyFunctional::required_components() const noexcept {
  if (variant_ != Variant::phase_field) return 0;
  return isothermal() ? 1 : 2;
}

bool EntropyFunctional::is_local() const noexcept {
  return variant_ == Variant::boltzmann || variant_ == Variant::thermal;
}

void EntropyFunctional::check_shape(const State& z) const {
  if (z.size() == 0) fail(ErrorKind::usage, "entropy: empty state");
  const std::size_t need = required_components();
  if (need != 0 && z.size() != need)
    fail(ErrorKind::usage, std::string("entropy ") + to_string(variant_) +
                               " expects " + std::to_string(need) +
                               " components");
  if (variant_ == Variant::phase_field) {
    if (!z.grid().closed())
      fail(ErrorKind::unsupported, "phase field entropy needs a closed grid");
    if (frozen_T_) require_same_grid(frozen_T_->grid(), z.grid(), "isothermal phase field");
  }
}

Field EntropyFunctional::phase_temperature(const Field& phi,
                                           const Field& e) const {
  const PhaseFieldParams& p = params_;
  const Field G = grad_sq_cells(phi);
  Field T(phi.grid());
  for (std::size_t i = 0; i < T.size(); ++i)
    T[i] = (e[i] - p.w * well(phi[i]) + p.latent_heat * interp(phi[i]) -
            0.5 * p.kappa * G[i]) /
           p.c_v;
  return T;
}

Field phase_energy(const PhaseFieldParams& p, const Field& phi, const Field& T) {
  require_same_grid(phi.grid(), T.grid(), "phase_energy");
  const Field G = grad_sq_cells(phi);
  Field e(phi.grid());
  for (std::size_t i = 0; i < e.size(); ++i)
    e[i] = p.c_v * T[i] + p.w * well(phi[i]) - p.latent_heat * interp(phi[i]) +
           0.5 * p.kappa * G[i];
  return e;
}

Field EntropyFunctional::temperature(const State& z) const {
  check_shape(z);
  switch (variant_) {
    case Variant::thermal: {
      Field T = z[0];
      T *= 1.0 / params_.c_v;
      return T;
    }
    case Variant::phase_field:
      return isothermal() ? *frozen_T_ : phase_temperature(z[0], z[1]);
    default:
      fail(ErrorKind::unsupported,
           std::string("no temperature for entropy ") + to_string(variant_));
  }
}

void EntropyFunctional::check_admissible(const State& z) const {
  check_shape(z);
  switch (variant_) {
    case Variant::dirichlet: break;
    case Variant::boltzmann:
    case Variant::thermal:
      for (std::size_t k = 0; k < z.size(); ++k) {
        for (std::size_t i = 0; i < z.n_cells(); ++i)
          if (!(z[k][i] > 0.0))
            bad_cell(variant_ == Variant::boltzmann ? "nonpositive density"
                                                    : "nonpositive energy",
                     k, i, z[k][i]);
        if (!z.grid().closed()) {
          const Wall w = z[k].wall();
          if (!(w.left > 0.0) || !(w.right > 0.0))
            fail(ErrorKind::domain, "nonpositive dirichlet wall value");
        }
      }
      break;
    case Variant::phase_field:
      if (!isothermal()) {
        const Field T = phase_temperature(z[0], z[1]);
        for (std::size_t i = 0; i < T.size(); ++i)
          if (!(T[i] > 0.0)) bad_cell("nonpositive temperature", 1, i, T[i]);
      }
      break;
  }
  if (!z.all_finite()) fail(ErrorKind::domain, "entropy: non-finite state");
}

double EntropyFunctional::eval(const State& z) const {
  check_admissible(z);
  const double dx = z.grid().dx();
  double s = 0.0;
  switch (variant_) {
    case Variant::dirichlet:
      for (const Field& rho : z) {
        const FluxField g = gradient(rho);
        s -= 0.5 * inner(g, g);
      }
      return s;
    case Variant::boltzmann:
      for (const Field& rho : z)
        for (double r : rho.values()) s -= r * std::log(r);
      return s * dx;
    case Variant::thermal:
      for (const Field& e : z)
        for (double v : e.values()) s += params_.c_v * std::log(v / params_.c_v);
      return s * dx;
    case Variant::phase_field: {
      const PhaseFieldParams& p = params_;
      const Field& phi = z[0];
      if (isothermal()) {
        const Field& T = *frozen_T_;
        const Field G = grad_sq_cells(phi);
        for (std::size_t i = 0; i < phi.size(); ++i) {
          const double f = p.w * well(phi[i]) +
                           p.latent_heat * interp(phi[i]) * (T[i] - p.T_m) / p.T_m +
                           0.5 * p.kappa * G[i];
          s -= f / T[i];
        }
        return s * dx;
      }
      const Field T = phase_temperature(phi, z[1]);
      for (std::size_t i = 0; i < phi.size(); ++i)
        s += p.c_v * std::log(T[i]) - p.latent_heat * interp(phi[i]) / p.T_m;
      return s * dx;
    }
  }
  return s;
}

double EntropyFunctional::local_derivative(double value) const {
  switch (variant_) {
    case Variant::boltzmann:
      if (!(value > 0.0)) fail(ErrorKind::domain, "nonpositive wall density");
      return -(std::log(value) + 1.0);
    case Variant::thermal:
      if (!(value > 0.0)) fail(ErrorKind::domain, "nonpositive wall energy");
      return params_.c_v / value;
    default:
      fail(ErrorKind::unsupported,
           std::string("entropy ") + to_string(variant_) + " is not local");
  }
}

State EntropyFunctional::variational_derivative(const State& z) const {
  check_admissible(z);
  State out = z.zeros_like();
  switch (variant_) {
    case Variant::dirichlet:
      for (std::size_t k = 0; k < z.size(); ++k)
        out[k] = divergence(gradient(z[k]));
      break;
    case Variant::boltzmann:
    case Variant::thermal:
      for (std::size_t k = 0; k < z.size(); ++k) {
        for (std::size_t i = 0; i < z.n_cells(); ++i)
          out[k][i] = local_derivative(z[k][i]);
        if (!z.grid().closed()) {
          const Wall w = z[k].wall();
          out[k].set_wall({local_derivative(w.left), local_derivative(w.right)});
        }
      }
      break;
    case Variant::phase_field: {
      const PhaseFieldParams& p = params_;
      const Field& phi = z[0];
      const Field T = isothermal() ? *frozen_T_ : phase_temperature(phi, z[1]);
      const Field grad_term = gradient_force(phi, T, p.kappa);
      for (std::size_t i = 0; i < phi.size(); ++i) {
        const double f_phi = p.w * well_prime(phi[i]) +
                             p.latent_heat * interp_prime(phi[i]) *
                                 (T[i] - p.T_m) / p.T_m;
        out[0][i] = -f_phi / T[i] + grad_term[i];
      }
      if (!isothermal())
        for (std::size_t i = 0; i < phi.size(); ++i) out[1][i] = 1.0 / T[i];
      break;
    }
  }
  return out;
}

State EntropyFunctional::variational_derivative_fd(const State& z,
                                                   double h) const {
  if (!(h > 0.0)) fail(ErrorKind::usage, "finite-difference step must be positive");
  check_admissible(z);
  const double dx = z.grid().dx();
  State out = z.zeros_like();
  State probe = z;
  for (std::size_t k = 0; k < z.size(); ++k) {
    for (std::size_t i = 0; i < z.n_cells(); ++i) {
      const double base = z[k][i];
      const double step = h * std::max(1.0, std::abs(base));
      probe[k][i] = base + step;
      const double up = eval(probe);
      probe[k][i] = base - step;
      const double down = eval(probe);
      probe[k][i] = base;
      out[k][i] = (up - down) / (2.0 * step * dx);
    }
  }
  return out;
}

SparseMatrix EntropyFunctional::hessian(const State& z) const {
  check_admissible(z);
  const std::size_t n = z.n_cells();
  const auto dof = static_cast<Eigen::Index>(z.dof());
  switch (variant_) {
    case Variant::dirichlet: {
      const SparseMatrix lap = divergence_matrix(z.grid()) * gradient_matrix(z.grid());
      Triplets t;
      for (std::size_t k = 0; k < z.size(); ++k)
        for (int col = 0; col < lap.outerSize(); ++col)
          for (SparseMatrix::InnerIterator it(lap, col); it; ++it)
            t.emplace_back(static_cast<int>(k * n) + it.row(),
                           static_cast<int>(k * n) + it.col(), it.value());
      SparseMatrix H(dof, dof);
      H.setFromTriplets(t.begin(), t.end());
      return H;
    }
    case Variant::boltzmann:
    case Variant::thermal: {
      Triplets t;
      for (std::size_t k = 0; k < z.size(); ++k)
        for (std::size_t i = 0; i < n; ++i) {
          const double v = z[k][i];
          const double d = variant_ == Variant::boltzmann ? -1.0 / v
                                                          : -params_.c_v / (v * v);
          const auto idx = static_cast<int>(k * n + i);
          t.emplace_back(idx, idx, d);
        }
      SparseMatrix H(dof, dof);
      H.setFromTriplets(t.begin(), t.end());
      return H;
    }
    case Variant::phase_field:
      return hessian_fd(z);
  }
  return {};
}

// Column-coloured central differences. DS at cell i depends on state values
// within two cells, so columns five apart never share a row.
SparseMatrix EntropyFunctional::hessian_fd(const State& z) const {
  constexpr std::size_t stride = 5;
  constexpr std::size_t reach = 2;
  const std::size_t n = z.n_cells();
  const bool periodic = z.grid().kind() == Boundary::periodic;
  const std::size_t full = (n / stride) * stride;

  std::vector<std::size_t> color(n);
  std::size_t n_colors = stride;
  for (std::size_t j = 0; j < n; ++j)
    color[j] = j < full ? j % stride : n_colors++;
  if (full == 0) {
    for (std::size_t j = 0; j < n; ++j) color[j] = j;
    n_colors = n;
  }

  auto cyc = [&](std::size_t a, std::size_t b) {
    const std::size_t d = a > b ? a - b : b - a;
    return periodic ? std::min(d, n - d) : d;
  };

  Triplets t;
  const auto dof = static_cast<Eigen::Index>(z.dof());
  for (std::size_t k = 0; k < z.size(); ++k) {
    for (std::size_t c = 0; c < n_colors; ++c) {
      State up = z, down = z;
      std::vector<std::size_t> cols;
      std::vector<double> steps(n, 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        if (color[j] != c) continue;
        cols.push_back(j);
        steps[j] = 1e-6 * std::max(1.0, std::abs(z[k][j]));
        up[k][j] += steps[j];
        down[k][j] -= steps[j];
      }
      if (cols.empty()) continue;
      const State dp = variational_derivative(up);
      const State dm = variational_derivative(down);
      for (std::size_t r = 0; r < z.size(); ++r)
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j : cols) {
            if (cyc(i, j) > reach) continue;
            const double v = (dp[r][i] - dm[r][i]) / (2.0 * steps[j]);
            if (v != 0.0)
              t.emplace_back(static_cast<int>(r * n + i),
                             static_cast<int>(k * n + j), v);
          }
        }
    }
  }
  SparseMatrix H(dof, dof);
  H.setFromTriplets(t.begin(), t.end());
  return H;
}

}  // namespace mepp
