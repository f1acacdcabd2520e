#include <cmath>

#include "doctest.h"
#include "mepp/error.hpp"
#include "mepp/functionals.hpp"
#include "test_util.hpp"

using namespace mepp;
using mepp::test::kPi;

namespace {

PhaseFieldParams phase_params() {
  PhaseFieldParams p;
  p.w = 0.8;
  p.kappa = 0.01;
  p.latent_heat = 0.5;
  p.T_m = 1.0;
  p.c_v = 2.0;
  return p;
}

State random_phase_state(const Grid1D& g, std::mt19937_64& rng) {
  Field phi = test::smooth_positive(g, rng, 0.5, 0.8);
  Field e = test::smooth_positive(g, rng, 3.0, 0.5);
  return State{phi, e};
}

double max_rel(const State& a, const State& b) { return test::rel_diff(a, b); }

}  // namespace

TEST_CASE("boltzmann entropy values") {
  const Grid1D g(16, 1.0, BoundaryCondition::periodic());
  const auto S = EntropyFunctional::boltzmann();
  CHECK(S.eval(State(Field(g, 1.0))) == doctest::Approx(0.0));
  CHECK(S.eval(State(Field(g, 2.0))) == doctest::Approx(-2.0 * std::log(2.0)).epsilon(1e-14));
  const State DS = S.variational_derivative(State(Field(g, 1.0)));
  for (double v : DS[0].values()) CHECK(v == doctest::Approx(-1.0));
  Field bad(g, 1.0);
  bad[5] = 0.0;
  try {
    S.eval(State(bad));
    FAIL("expected a domain error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::domain);
    CHECK(std::string(e.what()).find("cell 5") != std::string::npos);
  }
}

TEST_CASE("dirichlet integral") {
  const Grid1D g(12, 1.0, BoundaryCondition::no_flux());
  const auto S = EntropyFunctional::dirichlet();
  CHECK(S.eval(State(Field(g, 4.0))) == 0.0);
  // Laplacian of sin(2 pi x), analytic oracle, O(dx^2)
  const Grid1D p(256, 1.0, BoundaryCondition::periodic());
  const Field rho = test::field_from(p, [](double x) { return std::sin(2 * kPi * x); });
  const State DS = S.variational_derivative(State(rho));
  double err = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i)
    err = std::max(err, std::abs(DS[0][i] + 4 * kPi * kPi * rho[i]));
  const double dx = p.dx();
  CHECK(err < 4 * std::pow(2 * kPi, 4) / 12.0 * dx * dx);
}

TEST_CASE("thermal entropy gives 1/T") {
  const Grid1D g(8, 1.0, BoundaryCondition::no_flux());
  const auto S = EntropyFunctional::thermal(1.0);
  const State DS = S.variational_derivative(State(Field(g, 2.0)));
  for (double v : DS[0].values()) CHECK(v == doctest::Approx(0.5));
  // ds/de * e = c_v for e = c_v T
  std::mt19937_64 rng(1);
  const auto S3 = EntropyFunctional::thermal(3.0);
  const Field e = test::smooth_positive(g, rng, 2.0, 1.0);
  const State D3 = S3.variational_derivative(State(e));
  for (std::size_t i = 0; i < e.size(); ++i)
    CHECK(D3[0][i] * e[i] == doctest::Approx(3.0).epsilon(1e-15));
  const Field T = S3.temperature(State(e));
  CHECK(T[2] == doctest::Approx(e[2] / 3.0));
  CHECK_THROWS_AS(EntropyFunctional::thermal(0.0), Error);
}

TEST_CASE("finite-difference oracle on trivial states") {
  const Grid1D g(10, 1.0, BoundaryCondition::periodic());
  const State fd = EntropyFunctional::boltzmann().variational_derivative_fd(State(Field(g, 1.0)), 1e-5);
  for (double v : fd[0].values()) CHECK(v == doctest::Approx(-1.0).epsilon(1e-8));
  const State fd0 = EntropyFunctional::dirichlet().variational_derivative_fd(State(Field(g, 0.3)), 1e-5);
  for (double v : fd0[0].values()) CHECK(std::abs(v) < 1e-8);
}

TEST_CASE("analytic DS matches the finite-difference oracle for every variant") {
  std::mt19937_64 rng(2024);
  const double tol = 1e-6;
  for (auto bc : {BoundaryCondition::periodic(), BoundaryCondition::no_flux()}) {
    const Grid1D g(24, 1.0, bc);
    for (int trial = 0; trial < 100; ++trial) {
      {
        const State z(test::smooth_positive(g, rng, 1.0, 0.8));
        const auto S = EntropyFunctional::boltzmann();
        CHECK(max_rel(S.variational_derivative(z), S.variational_derivative_fd(z, 1e-5)) < tol);
      }
      {
        const State z(test::random_field(g, rng));
        const auto S = EntropyFunctional::dirichlet();
        CHECK(max_rel(S.variational_derivative(z), S.variational_derivative_fd(z, 1e-5)) < tol);
      }
      {
        const State z(test::smooth_positive(g, rng, 2.0, 1.0));
        const auto S = EntropyFunctional::thermal(1.5);
        CHECK(max_rel(S.variational_derivative(z), S.variational_derivative_fd(z, 1e-5)) < tol);
      }
      {
        const State z = random_phase_state(g, rng);
        const auto S = EntropyFunctional::phase_field(phase_params());
        CHECK(max_rel(S.variational_derivative(z), S.variational_derivative_fd(z, 1e-5)) < tol);
      }
      {
        const Field T = test::smooth_positive(g, rng, 1.0, 0.3);
        const auto S = EntropyFunctional::phase_field_isothermal(phase_params(), T);
        const State z(test::smooth_positive(g, rng, 0.5, 0.8));
        CHECK(max_rel(S.variational_derivative(z), S.variational_derivative_fd(z, 1e-5)) < tol);
      }
    }
  }
}

TEST_CASE("boltzmann entropy is concave along segments") {
  std::mt19937_64 rng(77);
  const Grid1D g(32, 1.0, BoundaryCondition::periodic());
  const auto S = EntropyFunctional::boltzmann();
  for (int trial = 0; trial < 100; ++trial) {
    const State a(test::smooth_positive(g, rng, 1.0, 0.9));
    const State b(test::smooth_positive(g, rng, 1.5, 0.9));
    const State mid = 0.5 * (a + b);
    CHECK(S.eval(mid) >= 0.5 * (S.eval(a) + S.eval(b)) - 1e-12);
  }
}

TEST_CASE("phase field equilibrium at the melting temperature") {
  const Grid1D g(16, 1.0, BoundaryCondition::no_flux());
  PhaseFieldParams p = phase_params();
  const auto S = EntropyFunctional::phase_field(p);
  // phi = 0 and T = T_m everywhere: e = c_v T_m
  const State z{Field(g, 0.0), Field(g, p.c_v * p.T_m)};
  const State DS = S.variational_derivative(z);
  for (double v : DS[0].values()) CHECK(std::abs(v) < 1e-15);
  for (double v : DS[1].values()) CHECK(v == doctest::Approx(1.0 / p.T_m));
  const Field T = S.temperature(z);
  for (double v : T.values()) CHECK(v == doctest::Approx(p.T_m));
}

TEST_CASE("phase field hessian matches directional differences") {
  std::mt19937_64 rng(8);
  const Grid1D g(13, 1.0, BoundaryCondition::periodic());
  const auto S = EntropyFunctional::phase_field(phase_params());
  const State z = random_phase_state(g, rng);
  const SparseMatrix H = S.hessian(z);
  const State dir{test::random_field(g, rng), test::random_field(g, rng)};
  const double h = 1e-6;
  const State fd = (1.0 / (2 * h)) * (S.variational_derivative(z + h * dir) -
                                      S.variational_derivative(z - h * dir));
  const Vector hv = H * flatten(dir);
  CHECK(test::rel_diff(unflatten(hv, z), fd) < 1e-6);
}

TEST_CASE("analytic hessians") {
  std::mt19937_64 rng(4);
  const Grid1D g(9, 1.0, BoundaryCondition::no_flux());
  const State z(test::smooth_positive(g, rng));
  const State dir(test::random_field(g, rng));
  for (const auto& S : {EntropyFunctional::boltzmann(), EntropyFunctional::thermal(2.0),
                        EntropyFunctional::dirichlet()}) {
    const double h = 1e-6;
    const State fd = (1.0 / (2 * h)) * (S.variational_derivative(z + h * dir) -
                                        S.variational_derivative(z - h * dir));
    const Vector hv = S.hessian(z) * flatten(dir);
    CHECK(test::rel_diff(unflatten(hv, z), fd) < 1e-6);
  }
}
