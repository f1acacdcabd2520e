#include <cmath>

#include "doctest.h"
#include "mepp/error.hpp"
#include "mepp/metrics.hpp"
#include "test_util.hpp"

using namespace mepp;

namespace {

HBlock random_spd(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.2, 3.0), c(-0.9, 0.9);
  HBlock H;
  H.u = u(rng);
  H.c = u(rng);
  H.uc = c(rng) * std::sqrt(H.u * H.c);
  return H;
}

MetricOp random_coupled(std::mt19937_64& rng, std::size_t n) {
  std::vector<HBlock> blocks;
  for (std::size_t i = 0; i < n; ++i) blocks.push_back(random_spd(rng));
  return MetricOp::coupled([blocks](const State&) { return blocks; });
}

State zero_total(State v) {
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double mean = total(v[k]) / v.grid().length();
    for (double& x : v[k].values()) x -= mean;
  }
  return v;
}

// Brute-force K^-1 norm by minimizing over all fluxes with div J = -v via
// direct enumeration of the null space (closed grids, wasserstein).
double kinv_wasserstein_oracle(const Field& v, const FluxField& M) {
  const Grid1D& g = v.grid();
  const std::size_t n = g.n_cells();
  const double dx = g.dx();
  std::vector<double> J(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) J[i + 1] = J[i] - v[i] * dx;
  if (g.kind() == Boundary::no_flux) {
    double s = 0;
    for (std::size_t f = 1; f < n; ++f) s += J[f] * J[f] / M[f] * dx;
    return s;
  }
  // periodic: J + c for the c minimizing sum (J + c)^2 / M
  double a = 0, b = 0;
  for (std::size_t f = 0; f < n; ++f) {
    a += 1.0 / M[f];
    b += J[f] / M[f];
  }
  const double c = -b / a;
  double s = 0;
  for (std::size_t f = 0; f < n; ++f) s += (J[f] + c) * (J[f] + c) / M[f] * dx;
  return s;
}

}  // namespace

TEST_CASE("face means") {
  CHECK(face_mean(FaceMean::log_mean, 1.0, std::exp(1.0)) ==
        doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-15));
  CHECK(face_mean(FaceMean::arithmetic, 1.0, 3.0) == 2.0);
  CHECK(face_mean(FaceMean::geometric, 2.0, 8.0) == doctest::Approx(4.0));
  CHECK(face_mean(FaceMean::log_mean, 2.5, 2.5) == 2.5);
  CHECK(face_mean(FaceMean::log_mean, 2.5, 2.5 * (1 + 1e-14)) == 2.5);
  CHECK_THROWS_AS(face_mean(FaceMean::log_mean, -1.0, 2.0), Error);
  CHECK_THROWS_AS(face_mean(FaceMean::geometric, -1e-3, 2.0), Error);
  CHECK(face_mean(FaceMean::geometric, 0.0, 2.0) == 0.0);
  CHECK(face_mean(FaceMean::log_mean, 3.0, 0.0) == 0.0);
}

TEST_CASE("block inversion") {
  const MBlock M = invert_H_blocks(HBlock{2.0, 2.0, 1.0});
  CHECK(M.u == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(M.c == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(M.uc == doctest::Approx(-1.0 / 6.0).epsilon(1e-15));
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const HBlock H = random_spd(rng);
    const MBlock m = invert_H_blocks(H);
    // 2 M H - I
    const double a = 2 * (m.u * H.u + m.uc * H.uc) - 1;
    const double b = 2 * (m.u * H.uc + m.uc * H.c);
    const double c = 2 * (m.uc * H.u + m.c * H.uc);
    const double d = 2 * (m.uc * H.uc + m.c * H.c) - 1;
    CHECK(std::max({std::abs(a), std::abs(b), std::abs(c), std::abs(d)}) <= 1e-12);
  }
  CHECK_FALSE(is_spd(HBlock{1.0, 1.0, 1.0}));
  CHECK_THROWS_AS(invert_H_blocks(HBlock{1.0, -1.0, 0.0}), Error);
}

TEST_CASE("l2m apply and norm") {
  const Grid1D g(10, 1.0, BoundaryCondition::periodic());
  const auto K = MetricOp::l2m_constant(2.0);
  const State z(Field(g, 1.0));
  const State F(Field(g, 3.0));
  const State v6 = K.apply(z, F);
  for (double v : v6[0].values()) CHECK(v == 6.0);
  // ||v||^2 = sum v^2 / m dx with v = 1, m = 2
  CHECK(K.kinv_norm_sq(z, State(Field(g, 1.0))) == doctest::Approx(0.5));
  CHECK_THROWS_AS(MetricOp::l2m_constant(-1.0).apply(z, F), Error);
}

TEST_CASE("wasserstein constant mobility is the scaled laplacian") {
  const Grid1D g(64, 1.0, BoundaryCondition::periodic());
  std::mt19937_64 rng(9);
  const Field F = test::random_field(g, rng);
  const auto K = MetricOp::wasserstein_constant(0.7);
  const State v = K.apply(State(Field(g, 1.0)), State(F));
  const Field lap = divergence(gradient(F));
  for (std::size_t i = 0; i < F.size(); ++i) CHECK(v[0][i] == doctest::Approx(-0.7 * lap[i]));
}

TEST_CASE("metric operators are symmetric and positive semidefinite") {
  std::mt19937_64 rng(11);
  for (auto bc : {BoundaryCondition::periodic(), BoundaryCondition::no_flux()}) {
    const Grid1D g(20, 1.0, bc);
    const State z1(test::smooth_positive(g, rng));
    const State z2{test::smooth_positive(g, rng), test::smooth_positive(g, rng)};
    const std::vector<std::pair<MetricOp, State>> cases = {
        {MetricOp::l2m([](const State& z, std::size_t) { return z[0]; }), z1},
        {MetricOp::wasserstein_state(1.3, FaceMean::log_mean), z1},
        {MetricOp::wasserstein_state(0.5, FaceMean::arithmetic), z1},
        {random_coupled(rng, g.n_cells()), z2},
    };
    for (const auto& [K, z] : cases) {
      for (int trial = 0; trial < 20; ++trial) {
        State F = z.zeros_like(), G = z.zeros_like();
        for (std::size_t k = 0; k < z.size(); ++k) {
          F[k] = test::random_field(g, rng);
          G[k] = test::random_field(g, rng);
        }
        const double fg = inner(F, K.apply(z, G));
        const double gf = inner(G, K.apply(z, F));
        CHECK(std::abs(fg - gf) <= 1e-12 * (1 + std::abs(fg)));
        CHECK(inner(F, K.apply(z, F)) >= -1e-14);
        // dual representation: ||K F||^2_{K^-1} = <F, K F>
        const State KF = K.apply(z, F);
        const double lhs = K.kinv_norm_sq(z, KF);
        const double rhs = inner(F, KF);
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
        // conserved components have zero total change
        for (std::size_t k = 0; k < z.size(); ++k)
          if (K.is_conserved(k)) CHECK(std::abs(total(KF[k])) < 1e-13);
      }
      const SparseMatrix A = K.assemble(z);
      State F = z.zeros_like();
      for (std::size_t k = 0; k < z.size(); ++k) F[k] = test::random_field(g, rng);
      const Vector av = A * flatten(F);
      CHECK(test::rel_diff(unflatten(av, z), K.apply(z, F)) < 1e-13);
    }
  }
}

TEST_CASE("wasserstein K^-1 norm matches the flux oracle") {
  std::mt19937_64 rng(12);
  for (auto bc : {BoundaryCondition::periodic(), BoundaryCondition::no_flux()}) {
    const Grid1D g(30, 2.0, bc);
    const Field rho = test::smooth_positive(g, rng);
    const auto K = MetricOp::wasserstein_state(1.0, FaceMean::log_mean);
    const FluxField M = face_mobility(FaceMean::log_mean, rho);
    for (int trial = 0; trial < 20; ++trial) {
      const State v = zero_total(State(test::random_field(g, rng)));
      const double ours = K.kinv_norm_sq(State(rho), v);
      const double oracle = kinv_wasserstein_oracle(v[0], M);
      CHECK(test::rel(ours, oracle) < 1e-12);
    }
  }
}

TEST_CASE("K^-1 norm rejects velocities that change the total") {
  const Grid1D g(10, 1.0, BoundaryCondition::no_flux());
  const auto K = MetricOp::wasserstein_constant(1.0);
  const State z(Field(g, 1.0));
  try {
    K.kinv_norm_sq(z, State(Field(g, 1.0)));
    FAIL("expected a range error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::range);
  }
}

TEST_CASE("dirichlet wasserstein norm uses the assembled operator") {
  std::mt19937_64 rng(13);
  const Grid1D g(16, 1.0, BoundaryCondition::dirichlet(1.0, 2.0));
  const auto K = MetricOp::wasserstein_constant(0.8);
  const State z(test::smooth_positive(g, rng, 1.5));
  for (int trial = 0; trial < 10; ++trial) {
    Field F = test::random_field(g, rng);
    F.set_wall(Wall{0.0, 0.0});
    const State KF = K.apply(z, State(F));
    CHECK(test::rel(K.kinv_norm_sq(z, KF), inner(State(F), KF)) < 1e-11);
  }
}

TEST_CASE("negative mobility is a domain error") {
  const Grid1D g(8, 1.0, BoundaryCondition::periodic());
  const auto K = MetricOp::wasserstein_state(1.0, FaceMean::arithmetic);
  Field rho(g, 1.0);
  rho[3] = -2.0;
  CHECK_THROWS_AS(K.apply(State(rho), State(Field(g, 1.0))), Error);
}
