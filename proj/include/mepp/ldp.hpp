#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mepp/stochastic.hpp"

namespace mepp {

struct LdpSeries {
  double t = 0.0;
  double production = 0.0;  // <DS, zdot>
  double Phi = 0.0;         // 1/2 |zdot|^2_{K^-1}
  double Psi = 0.0;         // 1/2 <DS, K DS>
  double gap = 0.0;         // |zdot - K DS|^2_{K^-1}
  /// <DS, zdot> - Phi - Psi + gap / 2, zero up to rounding.
  double identity_residual = 0.0;
};

struct LdpReport {
  double rate_value = 0.0;
  std::vector<LdpSeries> series;
  /// Largest |identity_residual| relative to the size of the terms.
  double identity_residual_max = 0.0;
};

/// Per-time expansion of the rate integrand; zdot by central differences.
/// A zdot outside the range of K (conserved total drifting) is a range
/// error naming the time index.
std::vector<LdpSeries> decompose(const Trajectory& path, const MetricOp& K,
                                 const EntropyFunctional& S);

/// I = 1/2 int |zdot - K DS|^2_{K^-1} dt, trapezoidal in time.
LdpReport rate_functional(const Trajectory& path, const MetricOp& K,
                          const EntropyFunctional& S);

/// Sup-norm tube around a reference path (all times, cells, components).
struct Tube {
  Trajectory reference;
  double radius = 0.0;
};

bool in_tube(const Trajectory& path, const Tube& tube);

struct DecayRow {
  double epsilon = 0.0;
  std::size_t replicas = 0;
  std::size_t hits = 0;
  double probability = 0.0;
  /// No hits: probability is an upper bound 1/N and -eps log P a lower bound.
  bool censored = false;
  double minus_eps_log_p = 0.0;
  /// Smallest rate functional over the replicas that stayed in the tube.
  std::optional<double> min_rate;
};

/// Monte-Carlo estimate of P[path stays in the tube] for each epsilon, with
/// the time grid of the tube reference. Order-of-magnitude diagnostic only.
std::vector<DecayRow> empirical_rate_decay(const Problem& p, const std::vector<double>& eps,
                                           std::size_t replicas, const Tube& tube,
                                           std::uint64_t seed);

}  // namespace mepp
