#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mepp {

enum class Boundary { periodic, no_flux, dirichlet };

struct BoundaryCondition {
  Boundary kind = Boundary::periodic;
  double left = 0.0;   // dirichlet wall values, ignored otherwise
  double right = 0.0;

  static BoundaryCondition periodic() { return {Boundary::periodic, 0, 0}; }
  static BoundaryCondition no_flux() { return {Boundary::no_flux, 0, 0}; }
  static BoundaryCondition dirichlet(double l, double r) {
    return {Boundary::dirichlet, l, r};
  }

  bool operator==(const BoundaryCondition&) const = default;
};

const char* to_string(Boundary b);

/// Uniform staggered 1-D grid: n cells with centers at (i + 1/2) dx and n + 1
/// faces at i dx. Face f separates cells f - 1 and f. On periodic grids face n
/// is the same face as face 0.
class Grid1D {
 public:
  Grid1D(std::size_t n_cells, double length, BoundaryCondition bc);

  std::size_t n_cells() const noexcept { return n_; }
  std::size_t n_faces() const noexcept { return n_ + 1; }
  double length() const noexcept { return length_; }
  double dx() const noexcept { return length_ / static_cast<double>(n_); }
  const BoundaryCondition& bc() const noexcept { return bc_; }
  Boundary kind() const noexcept { return bc_.kind; }

  /// periodic or no_flux: nothing enters or leaves through the walls.
  bool closed() const noexcept { return bc_.kind != Boundary::dirichlet; }

  double cell_center(std::size_t i) const noexcept {
    return (static_cast<double>(i) + 0.5) * dx();
  }
  double face_position(std::size_t f) const noexcept {
    return static_cast<double>(f) * dx();
  }

  /// Faces that carry an independent flux value: periodic 0..n-1,
  /// no_flux 1..n-1, dirichlet 0..n.
  std::size_t first_active_face() const noexcept {
    return bc_.kind == Boundary::no_flux ? 1 : 0;
  }
  std::size_t end_active_face() const noexcept {
    return bc_.kind == Boundary::dirichlet ? n_ + 1 : n_;
  }
  std::size_t n_active_faces() const noexcept {
    return end_active_face() - first_active_face();
  }

  /// Quadrature weight of face f in face sums.
  double face_weight(std::size_t f) const noexcept;

  /// Cells on either side of face f (periodic wrap applied). For wall faces of
  /// non-periodic grids the missing side is reported as the adjacent cell.
  std::size_t left_cell(std::size_t f) const noexcept;
  std::size_t right_cell(std::size_t f) const noexcept;

  bool operator==(const Grid1D&) const = default;

 private:
  std::size_t n_;
  double length_;
  BoundaryCondition bc_;
};

/// Dirichlet data attached to a particular field (overrides the grid values
/// when the field is not the state itself, e.g. DS = 1/T at the walls).
struct Wall {
  double left = 0.0;
  double right = 0.0;
  bool operator==(const Wall&) const = default;
};

/// Cell-centred values on a grid.
class Field {
 public:
  explicit Field(const Grid1D& grid, double value = 0.0);
  Field(const Grid1D& grid, std::vector<double> values);

  const Grid1D& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }

  /// Wall data used by `gradient` on dirichlet grids.
  Wall wall() const noexcept;
  bool has_own_wall() const noexcept { return wall_.has_value(); }
  Field& set_wall(Wall w) {
    wall_ = w;
    return *this;
  }

  bool all_finite() const noexcept;

  Field& operator+=(const Field& o);
  Field& operator-=(const Field& o);
  Field& operator*=(double s);

  bool operator==(const Field&) const = default;

 private:
  Grid1D grid_;
  std::vector<double> values_;
  std::optional<Wall> wall_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double s, Field a);

/// Face-centred values, always n + 1 entries. Periodic grids keep
/// values[n] == values[0]; no_flux grids keep both wall entries at 0.
class FluxField {
 public:
  explicit FluxField(const Grid1D& grid, double value = 0.0);
  FluxField(const Grid1D& grid, std::vector<double> values);

  const Grid1D& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t f) const noexcept { return values_[f]; }

  /// Writes face f and keeps the boundary conventions above.
  void set(std::size_t f, double v) noexcept;

  bool all_finite() const noexcept;
  bool operator==(const FluxField&) const = default;

 private:
  void normalize() noexcept;

  Grid1D grid_;
  std::vector<double> values_;
};

FluxField gradient(const Field& p);
Field divergence(const FluxField& J);

/// Facewise product a * b.
FluxField multiply(const FluxField& a, const FluxField& b);

double inner_l2_weighted(const Field& f, const Field& g, const Field& w);
/// Plain L2 pairing <f, g> = sum f g dx.
double inner(const Field& f, const Field& g);
/// Face pairing over the active faces.
double inner(const FluxField& a, const FluxField& b);
double h1_seminorm_weighted(const Field& p1, const Field& p2,
                            const FluxField& M);
/// sum f dx
double total(const Field& f);

/// CSV with header `x,value`, one row per cell (or per stored face; the
/// periodic duplicate face n is omitted).
std::string to_csv(const Field& f);
std::string to_csv(const FluxField& J);

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double v);

void require_same_grid(const Grid1D& a, const Grid1D& b, const char* what);

}  // namespace mepp
