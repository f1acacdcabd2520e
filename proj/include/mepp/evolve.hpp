#pragma once

#include <string>
#include <vector>

#include "mepp/functionals.hpp"
#include "mepp/metrics.hpp"

namespace mepp {

enum class Scheme { explicit_euler, semi_implicit };

const char* to_string(Scheme s);

/// Initial state together with the geometry and the entropy that drive it.
struct Problem {
  State z0;
  MetricOp K;
  EntropyFunctional S;
  std::vector<std::string> names;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  /// Number of steps that had to be retried with a halved dt.
  std::size_t rejections = 0;

  std::size_t size() const noexcept { return times.size(); }
};

struct Diagnostic {
  double t = 0.0;
  double S = 0.0;
  double mass = 0.0;
  double Phi = 0.0;
  double Psi = 0.0;
  double dSdt = 0.0;
};

struct RunOptions {
  double dt = 1e-3;
  std::size_t steps = 100;
  Scheme scheme = Scheme::semi_implicit;
  std::size_t max_halvings = 12;
};

/// One step of zdot = K DS.
///
/// explicit_euler: z + dt K(z) DS(z).
/// semi_implicit:  K frozen at z, DS linearized about z:
///   (I - dt K0 D2S) d = dt K DS,  then  z + dt K(z) (DS + D2S d).
/// The second application keeps the update in divergence form, so conserved
/// totals change only by rounding.
///
/// Throws StepRejected when the new state is inadmissible for S.
State step(const State& z, const MetricOp& K, const EntropyFunctional& S, double dt,
           Scheme scheme);

/// Fixed-dt integration; a rejected step is retried as two half steps, down
/// to dt / 2^max_halvings.
Trajectory run(const State& z0, const MetricOp& K, const EntropyFunctional& S,
               const RunOptions& opt);
Trajectory run(const Problem& p, const RunOptions& opt);

/// Central time differences, one-sided at the two ends.
std::vector<State> time_derivative(const Trajectory& traj);

/// Sum of the totals of the conserved components (all components when none
/// is conserved).
double conserved_total(const State& z, const MetricOp& K);

/// S, conserved total, Phi = 1/2 |zdot|^2_{K^-1}, Psi = 1/2 <DS, K DS> and a
/// finite-difference dS/dt at every recorded time.
std::vector<Diagnostic> diagnostics(const Trajectory& traj, const MetricOp& K,
                                    const EntropyFunctional& S);

std::string trajectory_csv(const Trajectory& traj, const std::vector<std::string>& names);
std::string diagnostics_csv(const std::vector<Diagnostic>& d);

// Heat conduction: state e = c_v T under the thermal entropy, conserved.

/// M = (2H)^-1 with a fixed face resistivity H.
MetricOp heat_metric_resistivity(const FluxField& H);
/// H = (2 k T_- T_+)^-1 re-evaluated from the current state: Fourier
/// conduction with constant conductivity k.
MetricOp heat_metric_conductivity(double k, double c_v);

/// T0 carries the temperature walls on dirichlet grids.
Problem heat_problem(const Field& T0, double c_v, MetricOp K);

struct HeatRun {
  Trajectory traj;
  /// Per step: max |div(k grad T) + div q| relative to max(|div q|, |q| / dx),
  /// k = M / (T_- T_+) and q = M grad(1/T) the Onsager flux.
  std::vector<double> cross_form_residual;
};

HeatRun run_heat(const Problem& heat, const RunOptions& opt);

/// Energy rate of the heat problem in Fourier form div(k grad T) and in
/// Onsager form -div(M grad(1/T)).
std::pair<Field, Field> heat_rates(const State& z, const MetricOp& K, double c_v);
/// Onsager heat flux q = M grad(1/T).
FluxField heat_flux(const State& z, const MetricOp& K, double c_v);

// Phase field coupled to heat: state (phi, e).

/// phi relaxes with resistivity eta (cells), e is conducted with face
/// resistivity H; no cross coupling.
Problem phase_field_problem(const Field& T0, const Field& phi0, const PhaseFieldParams& p,
                            const Field& eta, const FluxField& H);

/// Temperature frozen at T; phi relaxes under the Massieu functional with
/// mobility 1 / (2 eta).
Problem phase_field_isothermal_problem(const Field& T, const Field& phi0,
                                       const PhaseFieldParams& p, const Field& eta);

Trajectory run_phase_field(const Problem& pf, const RunOptions& opt);

}  // namespace mepp
