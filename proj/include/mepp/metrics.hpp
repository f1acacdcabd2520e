#pragma once

#include <functional>
#include <vector>

#include "mepp/linalg.hpp"
#include "mepp/state.hpp"

namespace mepp {

enum class FaceMean { arithmetic, log_mean, geometric };

const char* to_string(FaceMean m);

/// Two-point mean used to put a cell quantity on a face. log_mean is
/// (b - a) / (log b - log a), with the limit a when |b - a| <= 1e-12 |a|.
double face_mean(FaceMean rule, double a, double b);

/// face_mean of neighbouring cells at every face. Wall faces of no_flux grids
/// repeat the adjacent cell; dirichlet walls use the field's wall data.
FluxField face_mobility(FaceMean rule, const Field& z);

/// Resistivity block [[u, uc], [uc, c]] (the H of the dissipation penalty).
struct HBlock {
  double u = 1.0;
  double c = 1.0;
  double uc = 0.0;
};

/// Mobility block [[u, uc], [uc, c]] = (2H)^-1.
struct MBlock {
  double u = 0.0;
  double c = 0.0;
  double uc = 0.0;
};

bool is_spd(const HBlock& H) noexcept;

/// Schur-complement inversion M = (2H)^-1:
///   M_u  =  1/2 [H_u - H_uc H_c^-1 H_uc]^-1
///   M_c  =  1/2 [H_c - H_uc H_u^-1 H_uc]^-1
///   M_uc = -1/2 [H_u - H_uc H_c^-1 H_uc]^-1 H_uc H_c^-1
MBlock invert_H_blocks(const HBlock& H);

/// Metric operator K of the gradient flow zdot = K(z) DS(z).
///
/// * l2m:          K F = m(z) F, componentwise, every component non-conserved.
/// * wasserstein:  K F = -div(M(z) grad F), componentwise, every component
///                 conserved.
/// * coupled:      state (z_u, z_c); K F = (M_u F_u + M_uc grad F_c,
///                 -div(M_uc F_u + M_c grad F_c)) with M = (2H)^-1 pointwise.
///
/// In the coupled operator cell i (z_u) is paired with its left face i (flux
/// J). On no_flux grids cell 0 has no partner and carries M_u = 1/(2 H_u).
class MetricOp {
 public:
  enum class Variant { l2m, wasserstein, coupled };

  using CellMobility = std::function<Field(const State&, std::size_t)>;
  using FaceMobility = std::function<FluxField(const State&, std::size_t)>;
  using Blocks = std::function<std::vector<HBlock>(const State&)>;

  static MetricOp l2m(CellMobility m);
  static MetricOp wasserstein(FaceMobility M);
  static MetricOp coupled(Blocks H);

  static MetricOp l2m_constant(double m);
  static MetricOp wasserstein_constant(double M);
  /// Wasserstein with M = scale * face_mean(rule, z).
  static MetricOp wasserstein_state(double scale, FaceMean rule);
  static MetricOp coupled_constant(HBlock H);

  Variant variant() const noexcept { return variant_; }

  bool is_conserved(std::size_t component) const noexcept;
  std::size_t required_components() const noexcept {
    return variant_ == Variant::coupled ? 2 : 0;
  }

  Field cell_mobility(const State& z, std::size_t k) const;
  FluxField face_mobility(const State& z, std::size_t k) const;
  /// Pointwise resistivity blocks, one per cell (paired with its left face).
  std::vector<HBlock> resistivity_blocks(const State& z) const;
  std::vector<MBlock> mobility_blocks(const State& z) const;
  /// Whether cell i of a coupled operator has a flux partner.
  static bool paired(const Grid1D& g, std::size_t i) noexcept {
    return !(g.kind() == Boundary::no_flux && i == 0);
  }

  /// Velocity K(z) F. Dirichlet walls of F enter through `gradient`.
  State apply(const State& z, const State& F) const;

  /// ||v||^2 in the K^-1 metric. Conserved components must have zero total
  /// on closed grids (ErrorKind::range otherwise).
  double kinv_norm_sq(const State& z, const State& v) const;

  /// Matrix of the homogeneous part of F -> K(z) F on the flattened state.
  SparseMatrix assemble(const State& z) const;

 private:
  MetricOp() = default;
  void check_components(const State& z) const;

  Variant variant_ = Variant::l2m;
  CellMobility cell_;
  FaceMobility face_;
  Blocks blocks_;
};

const char* to_string(MetricOp::Variant v);

}  // namespace mepp
