#pragma once

#include <optional>

#include "mepp/linalg.hpp"
#include "mepp/state.hpp"

namespace mepp {

/// Parameters of the phase-field free energy
///   f(T, phi, grad phi) = c_v T (1 - log T) + w phi^2 (1 - phi)^2
///                         + L p(phi) (T - T_m) / T_m + (kappa / 2) |grad phi|^2,
/// p(phi) = phi^2 (3 - 2 phi). This gives e = c_v T + w g - L p + kappa/2 |grad phi|^2
/// and s = c_v log T - L p / T_m.
struct PhaseFieldParams {
  double w = 1.0;
  double kappa = 0.0;
  double latent_heat = 0.0;
  double T_m = 1.0;
  double c_v = 1.0;

  bool operator==(const PhaseFieldParams&) const = default;
};

/// Entropy functional S(z) with its variational derivative DS reported as a
/// density, so that <DS, zdot> (cell pairing) equals dS/dt.
///
/// Single-field variants (dirichlet, boltzmann, thermal) act componentwise on
/// multi-component states. The phase-field variant expects (phi, e).
class EntropyFunctional {
 public:
  enum class Variant { dirichlet, boltzmann, thermal, phase_field };

  static EntropyFunctional dirichlet();
  static EntropyFunctional boltzmann();
  static EntropyFunctional thermal(double c_v);
  static EntropyFunctional phase_field(const PhaseFieldParams& p);
  /// Massieu functional -sum f(T, phi, grad phi) / T dx at a frozen
  /// temperature field; the state is phi alone.
  static EntropyFunctional phase_field_isothermal(const PhaseFieldParams& p,
                                                  Field temperature);

  Variant variant() const noexcept { return variant_; }
  bool isothermal() const noexcept { return frozen_T_.has_value(); }
  double c_v() const noexcept { return params_.c_v; }
  const PhaseFieldParams& phase_params() const noexcept { return params_; }

  /// 0 when the variant applies componentwise to any number of fields.
  std::size_t required_components() const noexcept;
  /// Pointwise density (boltzmann, thermal): DS depends only on the local value.
  bool is_local() const noexcept;

  /// Throws ErrorKind::domain naming the first offending cell.
  void check_admissible(const State& z) const;

  double eval(const State& z) const;
  State variational_derivative(const State& z) const;
  /// Central differences of eval under per-cell perturbations of size
  /// h * max(1, |z_i|), divided by dx.
  State variational_derivative_fd(const State& z, double h) const;
  /// Jacobian of variational_derivative with respect to the flattened state.
  SparseMatrix hessian(const State& z) const;

  /// Derivative of the local density at a scalar value (dirichlet walls).
  double local_derivative(double value) const;

  /// Temperature field: thermal e / c_v, phase field from (phi, e).
  Field temperature(const State& z) const;

  bool operator==(const EntropyFunctional&) const = default;

 private:
  EntropyFunctional(Variant v, PhaseFieldParams p) : variant_(v), params_(p) {}

  void check_shape(const State& z) const;
  Field phase_temperature(const Field& phi, const Field& e) const;
  SparseMatrix hessian_fd(const State& z) const;

  Variant variant_;
  PhaseFieldParams params_;
  std::optional<Field> frozen_T_;
};

const char* to_string(EntropyFunctional::Variant v);

/// Internal energy e(T, phi, grad phi) of the phase-field model.
Field phase_energy(const PhaseFieldParams& p, const Field& phi, const Field& T);

}  // namespace mepp
