#include "mepp/grid.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "mepp/error.hpp"

namespace mepp {

const char* to_string(Boundary b) {
  switch (b) {
    case Boundary::periodic: return "periodic";
    case Boundary::no_flux: return "no_flux";
    case Boundary::dirichlet: return "dirichlet";
  }
  return "?";
}

Grid1D::Grid1D(std::size_t n_cells, double length, BoundaryCondition bc)
    : n_(n_cells), length_(length), bc_(bc) {
  if (n_cells < 3)
    fail(ErrorKind::usage, "Grid1D needs at least 3 cells, got " +
                               std::to_string(n_cells));
  if (!(length > 0.0) || !std::isfinite(length))
    fail(ErrorKind::usage, "Grid1D length must be positive and finite");
  if (bc.kind == Boundary::dirichlet &&
      !(std::isfinite(bc.left) && std::isfinite(bc.right)))
    fail(ErrorKind::usage, "dirichlet wall values must be finite");
}

double Grid1D::face_weight(std::size_t f) const noexcept {
  if (bc_.kind == Boundary::dirichlet && (f == 0 || f == n_)) return 0.5 * dx();
  return dx();
}

std::size_t Grid1D::left_cell(std::size_t f) const noexcept {
  if (f == 0) return bc_.kind == Boundary::periodic ? n_ - 1 : 0;
  return f - 1;
}

std::size_t Grid1D::right_cell(std::size_t f) const noexcept {
  if (f == n_) return bc_.kind == Boundary::periodic ? 0 : n_ - 1;
  return f;
}

void require_same_grid(const Grid1D& a, const Grid1D& b, const char* what) {
  if (!(a == b)) fail(ErrorKind::usage, std::string(what) + ": grids differ");
}

// --- Field -----------------------------------------------------------------

Field::Field(const Grid1D& grid, double value)
    : grid_(grid), values_(grid.n_cells(), value) {}

Field::Field(const Grid1D& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.n_cells())
    fail(ErrorKind::usage, "Field: expected " + std::to_string(grid_.n_cells()) +
                               " values, got " + std::to_string(values_.size()));
}

Wall Field::wall() const noexcept {
  if (wall_) return *wall_;
  return {grid_.bc().left, grid_.bc().right};
}

bool Field::all_finite() const noexcept {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

Field& Field::operator+=(const Field& o) {
  require_same_grid(grid_, o.grid_, "Field +=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
  return *this;
}

Field& Field::operator-=(const Field& o) {
  require_same_grid(grid_, o.grid_, "Field -=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
  return *this;
}

Field& Field::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double s, Field a) { return a *= s; }

// --- FluxField -------------------------------------------------------------

FluxField::FluxField(const Grid1D& grid, double value)
    : grid_(grid), values_(grid.n_faces(), value) {
  normalize();
}

FluxField::FluxField(const Grid1D& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.n_faces())
    fail(ErrorKind::usage, "FluxField: expected " +
                               std::to_string(grid_.n_faces()) + " values, got " +
                               std::to_string(values_.size()));
  normalize();
}

void FluxField::normalize() noexcept {
  const std::size_t n = grid_.n_cells();
  switch (grid_.kind()) {
    case Boundary::periodic: values_[n] = values_[0]; break;
    case Boundary::no_flux:
      values_[0] = 0.0;
      values_[n] = 0.0;
      break;
    case Boundary::dirichlet: break;
  }
}

void FluxField::set(std::size_t f, double v) noexcept {
  const std::size_t n = grid_.n_cells();
  if (grid_.kind() == Boundary::no_flux && (f == 0 || f == n)) return;
  values_[f] = v;
  if (grid_.kind() == Boundary::periodic) {
    if (f == 0) values_[n] = v;
    if (f == n) values_[0] = v;
  }
}

bool FluxField::all_finite() const noexcept {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

// --- operators ---------------------------------------------------------------

FluxField gradient(const Field& p) {
  const Grid1D& g = p.grid();
  const std::size_t n = g.n_cells();
  const double inv_dx = 1.0 / g.dx();
  std::vector<double> out(n + 1, 0.0);
  for (std::size_t f = 1; f < n; ++f) out[f] = (p[f] - p[f - 1]) * inv_dx;
  switch (g.kind()) {
    case Boundary::periodic:
      out[0] = (p[0] - p[n - 1]) * inv_dx;
      out[n] = out[0];
      break;
    case Boundary::no_flux: break;
    case Boundary::dirichlet: {
      // ghost value 2 w - p pinned to the wall data
      const Wall w = p.wall();
      out[0] = 2.0 * (p[0] - w.left) * inv_dx;
      out[n] = 2.0 * (w.right - p[n - 1]) * inv_dx;
      break;
    }
  }
  return FluxField(g, std::move(out));
}

Field divergence(const FluxField& J) {
  const Grid1D& g = J.grid();
  const std::size_t n = g.n_cells();
  const double inv_dx = 1.0 / g.dx();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (J[i + 1] - J[i]) * inv_dx;
  return Field(g, std::move(out));
}

FluxField multiply(const FluxField& a, const FluxField& b) {
  require_same_grid(a.grid(), b.grid(), "multiply");
  std::vector<double> out(a.size());
  for (std::size_t f = 0; f < out.size(); ++f) out[f] = a[f] * b[f];
  return FluxField(a.grid(), std::move(out));
}

double inner_l2_weighted(const Field& f, const Field& g, const Field& w) {
  require_same_grid(f.grid(), g.grid(), "inner_l2_weighted");
  require_same_grid(f.grid(), w.grid(), "inner_l2_weighted");
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += w[i] * (f[i] * g[i]);
  return s * f.grid().dx();
}

double inner(const Field& f, const Field& g) {
  require_same_grid(f.grid(), g.grid(), "inner");
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * g[i];
  return s * f.grid().dx();
}

double inner(const FluxField& a, const FluxField& b) {
  require_same_grid(a.grid(), b.grid(), "inner");
  const Grid1D& g = a.grid();
  double s = 0.0;
  for (std::size_t f = g.first_active_face(); f < g.end_active_face(); ++f)
    s += g.face_weight(f) * a[f] * b[f];
  return s;
}

double h1_seminorm_weighted(const Field& p1, const Field& p2,
                            const FluxField& M) {
  require_same_grid(p1.grid(), p2.grid(), "h1_seminorm_weighted");
  require_same_grid(p1.grid(), M.grid(), "h1_seminorm_weighted");
  const Grid1D& g = M.grid();
  for (std::size_t f = g.first_active_face(); f < g.end_active_face(); ++f)
    if (M[f] < 0.0)
      fail(ErrorKind::domain,
           "h1_seminorm_weighted: negative weight at face " + std::to_string(f));
  return inner(multiply(M, gradient(p1)), gradient(p2));
}

double total(const Field& f) {
  double s = 0.0;
  for (double v : f.values()) s += v;
  return s * f.grid().dx();
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string to_csv(const Field& f) {
  std::ostringstream os;
  os << "x,value\n";
  for (std::size_t i = 0; i < f.size(); ++i)
    os << format_double(f.grid().cell_center(i)) << ',' << format_double(f[i])
       << '\n';
  return os.str();
}

std::string to_csv(const FluxField& J) {
  const Grid1D& g = J.grid();
  const std::size_t end =
      g.kind() == Boundary::periodic ? g.n_cells() : g.n_faces();
  std::ostringstream os;
  os << "x,value\n";
  for (std::size_t f = 0; f < end; ++f)
    os << format_double(g.face_position(f)) << ',' << format_double(J[f])
       << '\n';
  return os.str();
}

}  // namespace mepp
