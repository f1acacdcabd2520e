#include "mepp/ldp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mepp/error.hpp"

namespace mepp {

std::vector<LdpSeries> decompose(const Trajectory& path, const MetricOp& K,
                                 const EntropyFunctional& S) {
  if (path.size() == 0) fail(ErrorKind::domain, "empty path");
  for (std::size_t k = 1; k < path.size(); ++k)
    if (!(path.times[k] > path.times[k - 1]))
      fail(ErrorKind::domain, "path times must increase (index " + std::to_string(k) + ")");
  const std::vector<State> zdot = time_derivative(path);
  std::vector<LdpSeries> out(path.size());
  for (std::size_t k = 0; k < path.size(); ++k) {
    const State& z = path.states[k];
    const State DS = S.variational_derivative(z);
    const State KDS = K.apply(z, DS);
    LdpSeries& r = out[k];
    r.t = path.times[k];
    try {
      r.production = inner(DS, zdot[k]);
      r.Phi = 0.5 * K.kinv_norm_sq(z, zdot[k]);
      r.Psi = 0.5 * inner(DS, KDS);
      r.gap = K.kinv_norm_sq(z, zdot[k] - KDS);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::range) throw;
      throw Error(ErrorKind::range, "time index " + std::to_string(k) + ": " + e.what());
    }
    r.identity_residual = r.production - r.Phi - r.Psi + 0.5 * r.gap;
  }
  return out;
}

LdpReport rate_functional(const Trajectory& path, const MetricOp& K,
                          const EntropyFunctional& S) {
  LdpReport rep;
  rep.series = decompose(path, K, S);
  for (std::size_t k = 0; k + 1 < rep.series.size(); ++k)
    rep.rate_value += 0.25 * (rep.series[k].gap + rep.series[k + 1].gap) *
                      (rep.series[k + 1].t - rep.series[k].t);
  for (const LdpSeries& r : rep.series) {
    const double scale = std::max({1.0, std::abs(r.production), r.Phi, r.Psi, r.gap});
    rep.identity_residual_max = std::max(rep.identity_residual_max,
                                         std::abs(r.identity_residual) / scale);
  }
  return rep;
}

bool in_tube(const Trajectory& path, const Tube& tube) {
  if (path.size() != tube.reference.size()) return false;
  for (std::size_t k = 0; k < path.size(); ++k)
    if (max_abs(path.states[k] - tube.reference.states[k]) > tube.radius) return false;
  return true;
}

std::vector<DecayRow> empirical_rate_decay(const Problem& p, const std::vector<double>& eps,
                                           std::size_t replicas, const Tube& tube,
                                           std::uint64_t seed) {
  const Trajectory& ref = tube.reference;
  if (ref.size() < 2) fail(ErrorKind::domain, "tube reference needs at least two times");
  if (!(tube.radius > 0.0)) fail(ErrorKind::domain, "tube radius must be positive");
  if (replicas == 0) fail(ErrorKind::domain, "need at least one replica");
  const double dt = ref.times[1] - ref.times[0];
  for (std::size_t k = 1; k < ref.size(); ++k)
    if (std::abs(ref.times[k] - ref.times[0] - static_cast<double>(k) * dt) > 1e-9 * dt * k)
      fail(ErrorKind::domain, "tube reference must use a uniform time grid");
  std::vector<DecayRow> rows;
  for (double e : eps) {
    if (!(e >= 0.0)) fail(ErrorKind::domain, "epsilon must be >= 0");
    const std::size_t N = e == 0.0 ? 1 : replicas;
    std::vector<char> hit(N, 0);
    std::vector<double> rate(N, std::numeric_limits<double>::infinity());
    parallel_for(N, [&](std::size_t r) {
      Trajectory tr;
      tr.times = ref.times;
      tr.states.reserve(ref.size());
      tr.states.push_back(p.z0);
      State z = p.z0;
      const NoiseConfig cfg{e, seed, r};
      try {
        for (std::size_t k = 1; k < ref.size(); ++k) {
          z = step_em(z, p.K, p.S, dt, cfg, k);
          if (max_abs(z - ref.states[k]) > tube.radius) return;
          tr.states.push_back(z);
        }
      } catch (const StepRejected&) {
        return;
      }
      if (!in_tube(tr, tube)) return;
      hit[r] = 1;
      rate[r] = rate_functional(tr, p.K, p.S).rate_value;
    });
    DecayRow row;
    row.epsilon = e;
    row.replicas = e == 0.0 ? replicas : N;
    for (std::size_t r = 0; r < N; ++r)
      if (hit[r]) {
        ++row.hits;
        row.min_rate = std::min(row.min_rate.value_or(rate[r]), rate[r]);
      }
    if (e == 0.0) row.hits *= replicas;
    row.probability = static_cast<double>(row.hits) / static_cast<double>(row.replicas);
    row.censored = row.hits == 0;
    const double P = row.censored ? 1.0 / static_cast<double>(row.replicas) : row.probability;
    row.minus_eps_log_p = -e * std::log(P);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mepp
