#include "mepp/stochastic.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numbers>
#include <string>
#include <thread>

#include "mepp/error.hpp"

namespace mepp {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double unit_from(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi >> 5) << 26) | (lo >> 6);
  return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}

State clamp_nonnegative(const State& z, bool& changed) {
  State out = z;
  changed = false;
  for (std::size_t k = 0; k < out.size(); ++k)
    for (double& v : out[k].values())
      if (v < 0.0) {
        v = 0.0;
        changed = true;
      }
  return out;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kW0;
      k[1] += kW1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
  return c;
}

NormalStream::NormalStream(std::uint64_t seed, std::uint64_t stream) noexcept {
  const std::uint64_t key = splitmix64(seed ^ splitmix64(stream));
  key_ = {static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)};
}

double NormalStream::uniform(std::uint64_t step, std::uint32_t channel,
                             std::uint32_t index) const noexcept {
  const auto r = philox4x32({index, channel | 0x80000000u, static_cast<std::uint32_t>(step),
                             static_cast<std::uint32_t>(step >> 32)},
                            key_);
  return unit_from(r[0], r[1]);
}

double NormalStream::normal(std::uint64_t step, std::uint32_t channel,
                            std::uint32_t index) const noexcept {
  // Box-Muller on one block per pair of indices.
  const auto r = philox4x32({index >> 1, channel, static_cast<std::uint32_t>(step),
                             static_cast<std::uint32_t>(step >> 32)},
                            key_);
  const double u1 = unit_from(r[0], r[1]);
  const double u2 = unit_from(r[2], r[3]);
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * std::numbers::pi * u2;
  return (index & 1u) ? rad * std::sin(th) : rad * std::cos(th);
}

Field sheet_cells(const Grid1D& g, double dt, const NoiseConfig& cfg, std::uint64_t step,
                  std::uint32_t channel) {
  if (!(dt > 0.0)) fail(ErrorKind::domain, "sheet increment: dt must be positive");
  const NormalStream rng(cfg.seed, cfg.stream);
  const double sd = std::sqrt(dt / g.dx());
  Field out(g);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = sd * rng.normal(step, channel, static_cast<std::uint32_t>(i));
  return out;
}

FluxField sheet_faces(const Grid1D& g, double dt, const NoiseConfig& cfg, std::uint64_t step,
                      std::uint32_t channel) {
  if (!(dt > 0.0)) fail(ErrorKind::domain, "sheet increment: dt must be positive");
  const NormalStream rng(cfg.seed, cfg.stream);
  FluxField out(g, 0.0);
  for (std::size_t f = g.first_active_face(); f < g.end_active_face(); ++f)
    out.set(f, std::sqrt(dt / g.face_weight(f)) *
                   rng.normal(step, channel, static_cast<std::uint32_t>(f)));
  return out;
}

Increment draw_increment(const Grid1D& g, std::size_t components, double dt,
                         const NoiseConfig& cfg, std::uint64_t step) {
  Increment inc;
  for (std::size_t k = 0; k < components; ++k) {
    const auto ch = static_cast<std::uint32_t>(2 * k);
    inc.cells.push_back(sheet_cells(g, dt, cfg, step, ch));
    inc.faces.push_back(sheet_faces(g, dt, cfg, step, ch + 1));
  }
  return inc;
}

std::array<double, 4> block_root(const MBlock& M, RootMethod method) {
  const double det = M.u * M.c - M.uc * M.uc;
  if (!(M.u >= 0.0) || !(M.c >= 0.0) || det < -1e-14 * std::max(1.0, M.u * M.c))
    fail(ErrorKind::domain, "mobility block is not positive semidefinite");
  if (method == RootMethod::cholesky) {
    const double l11 = std::sqrt(M.u);
    const double l21 = l11 > 0.0 ? M.uc / l11 : 0.0;
    const double l22 = std::sqrt(std::max(0.0, M.c - l21 * l21));
    return {l11, 0.0, l21, l22};
  }
  const double s = std::sqrt(std::max(0.0, det));
  const double t = std::sqrt(M.u + M.c + 2.0 * s);
  if (t == 0.0) return {0.0, 0.0, 0.0, 0.0};
  return {(M.u + s) / t, M.uc / t, M.uc / t, (M.c + s) / t};
}

State noise_action(const MetricOp& K, const State& z, const Increment& dB, RootMethod method,
                   bool* clamped) {
  if (dB.cells.size() < z.size() || dB.faces.size() < z.size())
    fail(ErrorKind::usage, "noise increment has too few components");
  const Grid1D& g = z.grid();
  bool used_clamp = false;
  // Mobility at z, or at max(z, 0) when z itself has no valid mobility.
  auto at = [&](auto&& eval) {
    try {
      return eval(z);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::domain) throw;
      bool changed = false;
      const State zc = clamp_nonnegative(z, changed);
      if (!changed) throw;
      used_clamp = true;
      return eval(zc);
    }
  };
  State out = z.zeros_like();
  switch (K.variant()) {
    case MetricOp::Variant::l2m:
      for (std::size_t k = 0; k < z.size(); ++k) {
        const Field m = at([&](const State& s) { return K.cell_mobility(s, k); });
        for (std::size_t i = 0; i < g.n_cells(); ++i)
          out[k][i] = std::sqrt(m[i]) * dB.cells[k][i];
      }
      break;
    case MetricOp::Variant::wasserstein:
      for (std::size_t k = 0; k < z.size(); ++k) {
        const FluxField M = at([&](const State& s) { return K.face_mobility(s, k); });
        std::vector<double> flux(g.n_faces(), 0.0);
        for (std::size_t f = g.first_active_face(); f < g.end_active_face(); ++f)
          flux[f] = std::sqrt(M[f]) * dB.faces[k][f];
        out[k] = divergence(FluxField(g, std::move(flux)));
      }
      break;
    case MetricOp::Variant::coupled: {
      const std::vector<MBlock> M = at([&](const State& s) { return K.mobility_blocks(s); });
      FluxField eta(g, 0.0);
      for (std::size_t i = 0; i < g.n_cells(); ++i) {
        const double a = dB.cells[0][i];
        if (!MetricOp::paired(g, i)) {
          out[0][i] = std::sqrt(M[i].u) * a;
          continue;
        }
        const double b = dB.faces[1][i];
        const auto R = block_root(M[i], method);
        out[0][i] = R[0] * a + R[1] * b;
        eta.set(i, R[2] * a + R[3] * b);
      }
      out[1] = divergence(eta);
      out[1] *= -1.0;
      break;
    }
  }
  if (clamped) *clamped = used_clamp;
  return out;
}

State step_em(const State& z, const MetricOp& K, const EntropyFunctional& S, double dt,
              const NoiseConfig& cfg, std::uint64_t step, bool* clamped) {
  if (!(dt > 0.0)) fail(ErrorKind::domain, "dt must be positive");
  if (!(cfg.epsilon >= 0.0)) fail(ErrorKind::domain, "epsilon must be >= 0");
  try {
    S.check_admissible(z);
  } catch (const CellError& e) {
    throw StepRejected(e.cell(), e.what());
  }
  const State v = K.apply(z, S.variational_derivative(z));
  State out = z + dt * v;
  if (clamped) *clamped = false;
  if (cfg.epsilon > 0.0) {
    const Increment dB = draw_increment(z.grid(), z.size(), dt, cfg, step);
    out += std::sqrt(cfg.epsilon) * noise_action(K, z, dB, RootMethod::symmetric, clamped);
  }
  return out;
}

std::size_t worker_count() {
  if (const char* env = std::getenv("MEPP_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(worker_count(), std::max<std::size_t>(count, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

EnsembleResult sample_ensemble(const Problem& p, const EnsembleOptions& opt) {
  if (!(opt.dt > 0.0)) fail(ErrorKind::domain, "dt must be positive");
  p.S.check_admissible(p.z0);
  const std::size_t R = opt.trajectories;
  EnsembleResult res;
  std::vector<Trajectory> paths(R);
  std::vector<State> finals(R, p.z0);
  std::vector<char> done(R, 0), clamp(R, 0);
  std::vector<double> drift(R, 0.0);
  const double m0 = conserved_total(p.z0, p.K);
  const double mscale = std::max(std::abs(m0), 1e-300);
  parallel_for(R, [&](std::size_t r) {
    NoiseConfig cfg = opt.noise;
    cfg.stream = opt.noise.stream + r;
    Trajectory tr;
    tr.times.push_back(0.0);
    tr.states.push_back(p.z0);
    State z = p.z0;
    try {
      for (std::size_t s = 1; s <= opt.steps; ++s) {
        bool c = false;
        z = step_em(z, p.K, p.S, opt.dt, cfg, s, &c);
        if (c) clamp[r] = 1;
        drift[r] = std::max(drift[r], std::abs(conserved_total(z, p.K) - m0) / mscale);
        if (opt.keep_paths) {
          tr.times.push_back(static_cast<double>(s) * opt.dt);
          tr.states.push_back(z);
        }
      }
      done[r] = 1;
      finals[r] = z;
    } catch (const StepRejected&) {
      done[r] = 0;
    }
    if (opt.keep_paths) paths[r] = std::move(tr);
  });
  for (std::size_t r = 0; r < R; ++r) {
    res.completed.push_back(done[r] != 0);
    if (!done[r]) ++res.rejected_replicas;
    if (clamp[r]) ++res.clamped_replicas;
    res.max_mass_drift = std::max(res.max_mass_drift, drift[r]);
  }
  if (opt.keep_paths) res.paths = std::move(paths);
  res.finals = std::move(finals);
  return res;
}

FdReport check_fluctuation_dissipation(const MetricOp& K, const State& z, double eps,
                                       double dt, std::size_t draws, std::size_t probes,
                                       std::uint64_t seed, double n_sigma,
                                       RootMethod method) {
  if (!(eps > 0.0) || !(dt > 0.0)) fail(ErrorKind::domain, "eps and dt must be positive");
  if (draws < 2 || probes == 0) fail(ErrorKind::domain, "need at least 2 draws and 1 probe");
  const Grid1D& g = z.grid();
  const std::size_t n = g.n_cells();
  const NormalStream prng(seed, 0xFDFDFDFDull);
  std::vector<State> v;
  for (std::size_t p = 0; p < probes; ++p) {
    State vp = z.zeros_like();
    for (std::size_t k = 0; k < z.size(); ++k) {
      for (std::size_t i = 0; i < n; ++i)
        vp[k][i] = prng.normal(p, static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(i));
      if (K.is_conserved(k) && g.closed()) {
        const double mean = total(vp[k]) / g.length();
        for (double& x : vp[k].values()) x -= mean;
      }
      if (!g.closed()) vp[k].set_wall({0.0, 0.0});
    }
    v.push_back(std::move(vp));
  }
  std::vector<double> q(draws * probes);
  std::vector<double> drift(draws, 0.0);
  const double se = std::sqrt(eps);
  parallel_for(draws, [&](std::size_t j) {
    const NoiseConfig cfg{eps, seed, j};
    const Increment dB = draw_increment(g, z.size(), dt, cfg, 0);
    const State xi = se * noise_action(K, z, dB, method);
    for (std::size_t p = 0; p < probes; ++p) q[j * probes + p] = inner(v[p], xi);
    for (std::size_t k = 0; k < z.size(); ++k)
      if (K.is_conserved(k)) {
        const double before = total(z[k]);
        const double after = total(z[k] + xi[k]);
        drift[j] = std::max(drift[j], std::abs(after - before) /
                                          std::max(std::abs(before), 1e-300));
      }
  });
  FdReport rep;
  rep.n_sigma = n_sigma;
  const double N = static_cast<double>(draws);
  for (std::size_t p = 0; p < probes; ++p) {
    double s1 = 0, s2 = 0, s4 = 0;
    for (std::size_t j = 0; j < draws; ++j) {
      const double x = q[j * probes + p];
      s1 += x;
      s2 += x * x;
      s4 += x * x * x * x;
    }
    ProbeResult r;
    r.mean = s1 / N;
    r.mean_std_error = std::sqrt(std::max(0.0, (s2 / N - r.mean * r.mean) / (N - 1)));
    r.empirical = s2 / N;
    r.std_error = std::sqrt(std::max(0.0, (s4 / N - r.empirical * r.empirical) / (N - 1)));
    r.predicted = eps * dt * inner(v[p], K.apply(z, v[p]));
    const double sig = r.std_error > 0 ? std::abs(r.empirical - r.predicted) / r.std_error
                                       : (r.empirical == r.predicted ? 0.0 : HUGE_VAL);
    const double msig = r.mean_std_error > 0 ? std::abs(r.mean) / r.mean_std_error : 0.0;
    rep.max_sigma = std::max(rep.max_sigma, sig);
    rep.max_mean_sigma = std::max(rep.max_mean_sigma, msig);
    rep.probes.push_back(r);
  }
  for (double d : drift) rep.max_mass_drift = std::max(rep.max_mass_drift, d);
  rep.pass = rep.max_sigma <= n_sigma && rep.max_mean_sigma <= n_sigma &&
             rep.max_mass_drift <= 1e-12;
  return rep;
}

}  // namespace mepp
