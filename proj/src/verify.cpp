#include "mepp/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "mepp/error.hpp"
#include "mepp/production.hpp"

namespace mepp {

bool VerifyReport::pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.pass; });
}

namespace {

constexpr int kTrials = 100;

Field random_cells(const Grid1D& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Field f(g);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = u(rng);
  if (g.kind() == Boundary::dirichlet) f.set_wall({0.0, 0.0});
  return f;
}

FluxField random_faces(const Grid1D& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FluxField J(g);
  for (std::size_t f = g.first_active_face(); f < g.end_active_face(); ++f) J.set(f, u(rng));
  return J;
}

State random_state(const State& like, std::mt19937_64& rng) {
  std::vector<Field> comps;
  for (const Field& f : like) comps.push_back(random_cells(f.grid(), rng));
  return State(std::move(comps));
}


void add(VerifyReport& r, const char* module, const char* name, double value, double tol) {
  r.rows.push_back({module, name, value, tol, std::isfinite(value) && value <= tol});
}

}  // namespace

VerifyReport verify_problem(const Problem& p, const RunOptions& opt, std::uint64_t seed) {
  VerifyReport rep;
  std::mt19937_64 rng(seed);
  const Grid1D& g = p.z0.grid();
  const State& z = p.z0;

  // grid
  {
    double sbp = 0.0, tel = 0.0;
    for (int t = 0; t < kTrials; ++t) {
      const Field q = random_cells(g, rng);
      const FluxField J = random_faces(g, rng);
      const FluxField gq = gradient(q);
      const Field dJ = divergence(J);
      double scale = 0.0;
      for (std::size_t f = g.first_active_face(); f < g.end_active_face(); ++f)
        scale += g.face_weight(f) * std::abs(gq[f] * J[f]);
      sbp = std::max(sbp, std::abs(inner(gq, J) + inner(q, dJ)) / std::max(scale, 1e-300));
      if (g.closed()) {
        double s = 0.0;
        for (std::size_t i = 0; i < dJ.size(); ++i) s += std::abs(dJ[i]) * g.dx();
        tel = std::max(tel, std::abs(total(dJ)) / std::max(s, 1e-300));
      }
    }
    add(rep, "grid", "summation by parts", sbp, 1e-13);
    if (g.closed()) add(rep, "grid", "divergence sums to zero", tel, 1e-13);
  }

  // functionals
  const State DS = p.S.variational_derivative(z);
  {
    const State fd = p.S.variational_derivative_fd(z, 1e-6);
    add(rep, "functionals", "DS matches finite differences",
        max_abs(DS - fd) / std::max(1.0, max_abs(DS)), 1e-6);
    if (p.S.variant() != EntropyFunctional::Variant::phase_field && !p.S.isothermal()) {
      const SparseMatrix H = p.S.hessian(z);
      double worst = 0.0;
      for (int t = 0; t < 20; ++t) {
        Eigen::VectorXd v = Eigen::VectorXd::Random(static_cast<Eigen::Index>(z.dof()));
        const double q = v.dot(H * v);
        worst = std::max(worst, q / std::max((H * v).norm() * v.norm(), 1e-300));
      }
      add(rep, "functionals", "concavity", std::max(worst, 0.0), 1e-12);
    }
  }

  // metrics
  {
    double sym = 0.0, psd = 0.0, mass = 0.0, dual = 0.0;
    for (int t = 0; t < 20; ++t) {
      const State a = random_state(z, rng), b = random_state(z, rng);
      const State Ka = p.K.apply(z, a), Kb = p.K.apply(z, b);
      const double ab = inner(a, Kb), ba = inner(Ka, b);
      const double na = std::sqrt(std::max(inner(a, a), 0.0)) * std::sqrt(inner(Ka, Ka));
      const double nb = std::sqrt(std::max(inner(b, b), 0.0)) * std::sqrt(inner(Kb, Kb));
      sym = std::max(sym, std::abs(ab - ba) / std::max(std::max(na, nb), 1e-300));
      const double aKa = inner(a, Ka);
      psd = std::max(psd, -aKa / std::max(na, 1e-300));
      if (g.closed())
        for (std::size_t k = 0; k < z.size(); ++k)
          if (p.K.is_conserved(k)) {
            double s = 0.0;
            for (std::size_t i = 0; i < Ka[k].size(); ++i) s += std::abs(Ka[k][i]) * g.dx();
            mass = std::max(mass, std::abs(total(Ka[k])) / std::max(s, 1e-300));
          }
      const double n2 = p.K.kinv_norm_sq(z, Ka);
      dual = std::max(dual, std::abs(n2 - aKa) / std::max(std::abs(aKa), 1e-300));
    }
    add(rep, "metrics", "K symmetric", sym, 1e-12);
    add(rep, "metrics", "K positive semi-definite", std::max(psd, 0.0), 1e-12);
    if (g.closed()) add(rep, "metrics", "K conserves totals", mass, 1e-12);
    add(rep, "metrics", "K^-1 norm dual to K", dual, 1e-10);
  }

  // mepp: the stationary point of the production Lagrangian is K DS
  {
    const State KDS = p.K.apply(z, DS);
    std::optional<MeppSolution> sol;
    switch (p.K.variant()) {
      case MetricOp::Variant::l2m: {
        Field eta(g);
        std::vector<Field> parts;
        for (std::size_t k = 0; k < z.size(); ++k) {
          const Field m = p.K.cell_mobility(z, k);
          for (std::size_t i = 0; i < m.size(); ++i) eta[i] = 0.5 / m[i];
          parts.push_back(solve_unconstrained_forces(State(DS[k]), eta).zdot[0]);
        }
        sol = MeppSolution{State(std::move(parts)), std::nullopt, std::nullopt, 0.0};
        break;
      }
      case MetricOp::Variant::wasserstein:
        if (g.closed() && z.size() == 1) {
          const FluxField M = p.K.face_mobility(z, 0);
          FluxField H(g);
          for (std::size_t f = g.first_active_face(); f < g.end_active_face(); ++f)
            H.set(f, 0.5 / M[f]);
          sol = solve_conserved_forces(DS[0], H);
        }
        break;
      case MetricOp::Variant::coupled:
        sol = solve_coupled_forces(DS, p.K.resistivity_blocks(z));
        break;
    }
    if (sol) {
      add(rep, "mepp", "stationary point equals K DS",
          max_abs(sol->zdot - KDS) / std::max(max_abs(KDS), 1e-300), 1e-10);
      if (sol->multiplier) {
        const std::size_t k = p.K.variant() == MetricOp::Variant::coupled ? 1 : 0;
        add(rep, "mepp", "multiplier equals DS",
            max_abs(State(*sol->multiplier) - State(DS[k])) / std::max(1.0, max_abs(State(DS[k]))),
            1e-12);
      }
    }
  }

  // evolution: Lyapunov property and conservation
  {
    const Trajectory tr = run(p, opt);
    double drop = 0.0, drift = 0.0;
    double prev = p.S.eval(tr.states.front());
    const double m0 = conserved_total(tr.states.front(), p.K);
    double mscale = 0.0;
    for (const Field& f : z)
      for (double v : f.values()) mscale += std::abs(v) * g.dx();
    for (std::size_t k = 1; k < tr.size(); ++k) {
      const double s = p.S.eval(tr.states[k]);
      drop = std::max(drop, (prev - s) / std::max(1.0, std::abs(prev)));
      prev = s;
      if (g.closed())
        drift = std::max(drift, std::abs(conserved_total(tr.states[k], p.K) - m0) /
                                    std::max(mscale, 1e-300));
    }
    // open grids exchange entropy with the walls; S is a Lyapunov functional
    // only for closed systems
    if (g.closed()) {
      add(rep, "mepp", "entropy nondecreasing along the flow", std::max(drop, 0.0), 1e-12);
      add(rep, "mepp", "conserved total constant", drift, 1e-12);
    }
  }
  return rep;
}

std::string format_table(const VerifyReport& r) {
  std::string out;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-12s %-40s %-12s %-10s %s\n", "module", "check", "error",
                "tolerance", "result");
  out += buf;
  for (const CheckRow& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%-12s %-40s %-12.3e %-10.0e %s\n", row.module.c_str(),
                  row.name.c_str(), row.value, row.tolerance, row.pass ? "PASS" : "FAIL");
    out += buf;
  }
  out += r.pass() ? "all checks passed\n" : "some checks FAILED\n";
  return out;
}

}  // namespace mepp
