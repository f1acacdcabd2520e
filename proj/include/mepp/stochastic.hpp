#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "mepp/evolve.hpp"

namespace mepp {

struct NoiseConfig {
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

/// Philox4x32-10 block function.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// Standard normals addressed by (step, channel, index) under a key derived
/// from (seed, stream). Same address, same value, on any thread.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream) noexcept;
  double normal(std::uint64_t step, std::uint32_t channel, std::uint32_t index) const noexcept;
  /// Uniform in (0, 1].
  double uniform(std::uint64_t step, std::uint32_t channel, std::uint32_t index) const noexcept;

 private:
  std::array<std::uint32_t, 2> key_;
};

/// Brownian-sheet increments over one step: i.i.d. N(0, dt / w) with w the
/// cell width (cells) or the face quadrature weight (active faces).
Field sheet_cells(const Grid1D& g, double dt, const NoiseConfig& cfg, std::uint64_t step,
                  std::uint32_t channel = 0);
FluxField sheet_faces(const Grid1D& g, double dt, const NoiseConfig& cfg, std::uint64_t step,
                      std::uint32_t channel = 1);

/// One cell and one face increment per state component.
struct Increment {
  std::vector<Field> cells;
  std::vector<FluxField> faces;
};

Increment draw_increment(const Grid1D& g, std::size_t components, double dt,
                         const NoiseConfig& cfg, std::uint64_t step);

enum class RootMethod { symmetric, cholesky };

/// Square root R of a 2x2 PSD block with R R^T = M: closed-form symmetric
/// root or lower Cholesky factor. Row-major {r11, r12, r21, r22}.
std::array<double, 4> block_root(const MBlock& M, RootMethod method);

/// sigma dB with sigma sigma^* = K(z):
///   l2m          sqrt(m) dB on cells,
///   wasserstein  div(sqrt(M) dB) on faces (sign irrelevant in law),
///   coupled      R (dB_cell, dB_face) per pair, the face row entering as
///                -div on the conserved component.
/// Mobilities are evaluated at max(z, 0); `clamped` reports when that
/// changed anything.
State noise_action(const MetricOp& K, const State& z, const Increment& dB,
                   RootMethod method = RootMethod::symmetric, bool* clamped = nullptr);

/// Euler-Maruyama (Ito): z + dt K DS + sqrt(eps) sigma dB. eps = 0 gives the
/// explicit deterministic step exactly. Throws StepRejected when the drift
/// cannot be evaluated at the new state.
State step_em(const State& z, const MetricOp& K, const EntropyFunctional& S, double dt,
              const NoiseConfig& cfg, std::uint64_t step, bool* clamped = nullptr);

/// Worker count: MEPP_THREADS when set, else hardware concurrency.
std::size_t worker_count();
/// Runs fn(0..count-1) on worker_count() threads; first exception rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

struct EnsembleOptions {
  double dt = 1e-4;
  std::size_t steps = 100;
  std::size_t trajectories = 10;
  NoiseConfig noise;
  bool keep_paths = true;
};

struct EnsembleResult {
  std::vector<Trajectory> paths;     // empty unless keep_paths
  std::vector<State> finals;         // one per completed replica
  std::vector<bool> completed;
  std::size_t clamped_replicas = 0;
  std::size_t rejected_replicas = 0;
  /// Largest relative change of the conserved total over all replicas/steps.
  double max_mass_drift = 0.0;
};

/// Replica r uses stream noise.stream + r.
EnsembleResult sample_ensemble(const Problem& p, const EnsembleOptions& opt);

struct ProbeResult {
  double empirical = 0.0;  // mean of <v, xi>^2
  double predicted = 0.0;  // eps dt <v, K v>
  double std_error = 0.0;
  double mean = 0.0;       // mean of <v, xi>
  double mean_std_error = 0.0;
};

struct FdReport {
  std::vector<ProbeResult> probes;
  double max_sigma = 0.0;       // worst |empirical - predicted| / std_error
  double max_mean_sigma = 0.0;  // worst |mean| / mean_std_error
  double max_mass_drift = 0.0;  // conserved components, per draw
  double n_sigma = 4.0;
  bool pass = false;
};

/// Monte-Carlo fluctuation-dissipation check at a fixed state: the noise
/// covariance tested against eps dt K through quadratic forms on random probe
/// vectors (conserved probes have zero mean).
FdReport check_fluctuation_dissipation(const MetricOp& K, const State& z, double eps,
                                       double dt, std::size_t draws, std::size_t probes,
                                       std::uint64_t seed, double n_sigma = 4.0,
                                       RootMethod method = RootMethod::symmetric);

}  // namespace mepp
