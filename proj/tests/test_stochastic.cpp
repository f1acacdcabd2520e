#include <cmath>

#include "doctest.h"
#include "mepp/error.hpp"
#include "mepp/stochastic.hpp"
#include "test_util.hpp"

using namespace mepp;

TEST_CASE("philox known answers") {
  const auto z = philox4x32({0, 0, 0, 0}, {0, 0});
  CHECK(z[0] == 0x6627e8d5u);
  CHECK(z[1] == 0xe169c58du);
  CHECK(z[2] == 0xbc57ac4cu);
  CHECK(z[3] == 0x9b00dbd8u);
  const auto f = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                            {0xffffffffu, 0xffffffffu});
  CHECK(f[0] == 0x408f276du);
  CHECK(f[1] == 0x41c83b0eu);
  CHECK(f[2] == 0xa20bc7c6u);
  CHECK(f[3] == 0x6d5451fdu);
  const auto pi = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                             {0xa4093822u, 0x299f31d0u});
  CHECK(pi[0] == 0xd16cfe09u);
  CHECK(pi[1] == 0x94fdccebu);
  CHECK(pi[2] == 0x5001e420u);
  CHECK(pi[3] == 0x24126ea1u);
}

TEST_CASE("increments are reproducible and stream dependent") {
  const Grid1D g(32, 1.0, BoundaryCondition::periodic());
  const NoiseConfig a{1.0, 42, 7}, b{1.0, 42, 8};
  CHECK(sheet_cells(g, 1e-3, a, 5) == sheet_cells(g, 1e-3, a, 5));
  CHECK_FALSE(sheet_cells(g, 1e-3, a, 5) == sheet_cells(g, 1e-3, b, 5));
  CHECK_FALSE(sheet_cells(g, 1e-3, a, 5) == sheet_cells(g, 1e-3, a, 6));
  const FluxField f = sheet_faces(g, 1e-3, a, 1);
  CHECK(f[0] == f[32]);
  const Grid1D nf(32, 1.0, BoundaryCondition::no_flux());
  const FluxField w = sheet_faces(nf, 1e-3, a, 1);
  CHECK(w[0] == 0.0);
  CHECK(w[32] == 0.0);
}

TEST_CASE("sheet increments have variance dt/dx and independent cells") {
  const Grid1D g(32, 1.0, BoundaryCondition::periodic());
  const double dt = 1e-3, target = dt / g.dx();
  const std::size_t N = 100000 / 32;  // 10^5 draws in total over cells
  double s2 = 0, s4 = 0, c01 = 0, s0 = 0, s1 = 0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < N; ++r) {
    const Field f = sheet_cells(g, dt, NoiseConfig{1.0, 3, r}, 0);
    for (double x : f.values()) {
      s2 += x * x;
      s4 += x * x * x * x;
      ++count;
    }
    c01 += f[0] * f[1];
    s0 += f[0] * f[0];
    s1 += f[1] * f[1];
  }
  const double n = static_cast<double>(count);
  const double var = s2 / n;
  const double se = std::sqrt((s4 / n - var * var) / (n - 1));
  CHECK(std::abs(var - target) <= 3 * se);
  const double corr = c01 / std::sqrt(s0 * s1);
  CHECK(std::abs(corr) <= 3 / std::sqrt(static_cast<double>(N)));
}

TEST_CASE("noise action examples") {
  const Grid1D g(16, 1.0, BoundaryCondition::periodic());
  const State z(Field(g, 1.0));
  const Increment dB = draw_increment(g, 1, 1e-3, NoiseConfig{1.0, 1, 0}, 0);
  const State a = noise_action(MetricOp::l2m_constant(1.0), z, dB);
  CHECK(a[0] == dB.cells[0]);
  const State b = noise_action(MetricOp::wasserstein_constant(4.0), z, dB);
  const Field ref = 2.0 * divergence(dB.faces[0]);
  CHECK(test::max_abs_diff(b, State(ref)) <= 1e-12 * max_abs(State(ref)));
  for (auto bc : {BoundaryCondition::periodic(), BoundaryCondition::no_flux()}) {
    const Grid1D h(20, 1.0, bc);
    std::mt19937_64 rng(3);
    const State rho(test::smooth_positive(h, rng));
    const Increment d = draw_increment(h, 1, 1e-2, NoiseConfig{1.0, 9, 0}, 3);
    const State xi = noise_action(MetricOp::wasserstein_state(1.0, FaceMean::log_mean), rho, d);
    CHECK(std::abs(total(xi[0])) <= 1e-15);
  }
  CHECK_THROWS_AS(noise_action(MetricOp::wasserstein_constant(-1.0), z, dB), Error);
}

TEST_CASE("negative densities use a clamped mobility inside the root") {
  const Grid1D g(8, 1.0, BoundaryCondition::periodic());
  Field rho(g, 1.0);
  rho[2] = -0.1;
  const Increment dB = draw_increment(g, 1, 1e-3, NoiseConfig{1.0, 1, 0}, 0);
  bool clamped = false;
  const State xi = noise_action(MetricOp::wasserstein_state(1.0, FaceMean::log_mean),
                                State(rho), dB, RootMethod::symmetric, &clamped);
  CHECK(clamped);
  CHECK(xi.all_finite());
}

TEST_CASE("block roots square to the block") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.1, 2.0), c(-0.9, 0.9);
  for (int t = 0; t < 200; ++t) {
    MBlock M;
    M.u = u(rng);
    M.c = u(rng);
    M.uc = c(rng) * std::sqrt(M.u * M.c);
    for (auto method : {RootMethod::symmetric, RootMethod::cholesky}) {
      const auto R = block_root(M, method);
      // R R^T
      CHECK(R[0] * R[0] + R[1] * R[1] == doctest::Approx(M.u).epsilon(1e-13));
      CHECK(R[0] * R[2] + R[1] * R[3] == doctest::Approx(M.uc).epsilon(1e-13));
      CHECK(R[2] * R[2] + R[3] * R[3] == doctest::Approx(M.c).epsilon(1e-13));
    }
  }
  const auto zero = block_root(MBlock{0, 0, 0}, RootMethod::symmetric);
  for (double r : zero) CHECK(r == 0.0);
}

TEST_CASE("zero noise reproduces the deterministic path bit for bit") {
  const Grid1D g(32, 1.0, BoundaryCondition::periodic());
  std::mt19937_64 rng(6);
  const State z0(test::smooth_positive(g, rng));
  const auto K = MetricOp::wasserstein_state(1.0, FaceMean::log_mean);
  const auto S = EntropyFunctional::boltzmann();
  const Trajectory det = run(z0, K, S, RunOptions{1e-5, 20, Scheme::explicit_euler});
  State z = z0;
  for (std::size_t s = 1; s <= 20; ++s) {
    z = step_em(z, K, S, 1e-5, NoiseConfig{0.0, 1, 1}, s);
    CHECK(z == det.states[s]);
  }
}

TEST_CASE("stochastic steps conserve mass in every replica") {
  const Grid1D g(32, 1.0, BoundaryCondition::periodic());
  const Problem p{State(Field(g, 1.0)), MetricOp::wasserstein_state(1.0, FaceMean::log_mean),
                  EntropyFunctional::boltzmann(), {"rho"}};
  EnsembleOptions opt;
  opt.dt = 1e-5;
  opt.steps = 20;
  opt.trajectories = 50;
  opt.noise = NoiseConfig{0.01, 11, 0};
  const EnsembleResult r = sample_ensemble(p, opt);
  CHECK(r.rejected_replicas == 0);
  CHECK(r.max_mass_drift <= 1e-12);
  const EnsembleResult again = sample_ensemble(p, opt);
  for (std::size_t i = 0; i < r.finals.size(); ++i) CHECK(r.finals[i] == again.finals[i]);
}

TEST_CASE("fluctuation-dissipation probe") {
  const Grid1D g(16, 1.0, BoundaryCondition::periodic());
  const auto K = MetricOp::wasserstein_state(1.0, FaceMean::log_mean);
  const FdReport rep = check_fluctuation_dissipation(K, State(Field(g, 1.0)), 0.5, 1e-3, 4000,
                                                     10, 77);
  CHECK(rep.pass);
  CHECK(rep.max_mass_drift <= 1e-12);
  const Grid1D h(12, 1.0, BoundaryCondition::no_flux());
  for (auto method : {RootMethod::symmetric, RootMethod::cholesky}) {
    const FdReport c = check_fluctuation_dissipation(
        MetricOp::coupled_constant(HBlock{1.0, 2.0, 0.7}), State{Field(h, 1.0), Field(h, 1.0)},
        1.0, 1e-3, 4000, 10, 78, 4.0, method);
    CHECK(c.pass);
  }
}
