#pragma once

#include <optional>
#include <vector>

#include "mepp/functionals.hpp"
#include "mepp/metrics.hpp"

namespace mepp {

/// Stationary point of a maximum-entropy-production Lagrangian at a fixed
/// state: optimal velocity, flux and multiplier where the constraint exists.
struct MeppSolution {
  State zdot;
  std::optional<FluxField> flux;
  std::optional<Field> multiplier;
  double lagrangian_value = 0.0;
};

/// D[zdot] = <DS, zdot> - <zdot, eta zdot>. Solves 2 eta zdot = DS.
MeppSolution solve_unconstrained(const State& z, const EntropyFunctional& S,
                                 const Field& eta);
MeppSolution solve_unconstrained_forces(const State& forces, const Field& eta);

/// D[zdot, J, lambda] = <DS, zdot> - <lambda, zdot + div J> - <J, H J> on a
/// closed grid. Solved as one symmetric indefinite KKT system in
/// (zdot, J, lambda).
MeppSolution solve_conserved(const Field& z, const EntropyFunctional& S,
                             const FluxField& H);
MeppSolution solve_conserved_forces(const Field& force, const FluxField& H);

/// Coupled Lagrangian for (z_u, z_c) with dissipation
/// <[zdot_u, J], H [zdot_u, J]>; blocks pair cell i with face i as in MetricOp.
MeppSolution solve_coupled(const State& z, const EntropyFunctional& S,
                           const std::vector<HBlock>& H);
MeppSolution solve_coupled_forces(const State& forces,
                                  const std::vector<HBlock>& H);

/// Onsager flux J = L X facewise.
FluxField onsager_flux(const FluxField& X, const FluxField& L);

}  // namespace mepp
