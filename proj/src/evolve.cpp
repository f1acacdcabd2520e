#include "mepp/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mepp/error.hpp"
#include "mepp/production.hpp"

namespace mepp {

const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::explicit_euler: return "explicit";
    case Scheme::semi_implicit: return "semi_implicit";
  }
  return "?";
}

namespace {

void reject_if_inadmissible(const State& z, const EntropyFunctional& S) {
  for (std::size_t k = 0; k < z.size(); ++k)
    for (std::size_t i = 0; i < z.n_cells(); ++i)
      if (!std::isfinite(z[k][i]))
        throw StepRejected(i, "non-finite value at component " + std::to_string(k) +
                                  ", cell " + std::to_string(i));
  try {
    S.check_admissible(z);
  } catch (const CellError& e) {
    throw StepRejected(e.cell(), e.what());
  }
}

State advance(const State& z, const MetricOp& K, const EntropyFunctional& S, double dt,
              Scheme scheme, std::size_t depth, std::size_t& rejections) {
  try {
    return step(z, K, S, dt, scheme);
  } catch (const StepRejected&) {
    if (depth == 0) throw;
    ++rejections;
    const State half = advance(z, K, S, 0.5 * dt, scheme, depth - 1, rejections);
    return advance(half, K, S, 0.5 * dt, scheme, depth - 1, rejections);
  }
}

// T_- T_+ at every face; wall faces use the wall temperature on dirichlet
// grids and the adjacent cell otherwise.
FluxField face_product(const Field& T) {
  const Grid1D& g = T.grid();
  const std::size_t n = g.n_cells();
  std::vector<double> v(g.n_faces());
  for (std::size_t f = 0; f <= n; ++f) {
    const std::size_t l = g.left_cell(f), r = g.right_cell(f);
    v[f] = T[l] * T[r];
  }
  if (g.kind() == Boundary::dirichlet) {
    const Wall w = T.wall();
    v[0] = w.left * T[0];
    v[n] = T[n - 1] * w.right;
  }
  return FluxField(g, std::move(v));
}

Field temperature_of(const Field& e, double c_v) {
  Field T = (1.0 / c_v) * e;
  const Wall w = e.wall();
  T.set_wall({w.left / c_v, w.right / c_v});
  return T;
}

}  // namespace

State step(const State& z, const MetricOp& K, const EntropyFunctional& S, double dt,
           Scheme scheme) {
  if (!(dt >= 0.0) || !std::isfinite(dt)) fail(ErrorKind::domain, "dt must be >= 0");
  S.check_admissible(z);
  if (dt == 0.0) return z;
  const State F = S.variational_derivative(z);
  State v = K.apply(z, F);
  if (scheme == Scheme::semi_implicit) {
    const SparseMatrix K0 = K.assemble(z);
    const SparseMatrix J = S.hessian(z);
    SparseMatrix A = -dt * (K0 * J);
    SparseMatrix I(A.rows(), A.cols());
    I.setIdentity();
    A += I;
    const Vector d = solve_sparse(A, dt * flatten(v), "semi-implicit step");
    const State lin = F + unflatten(J * d, F);
    v = K.apply(z, lin);
  }
  State out = z + dt * v;
  reject_if_inadmissible(out, S);
  return out;
}

Trajectory run(const State& z0, const MetricOp& K, const EntropyFunctional& S,
               const RunOptions& opt) {
  if (!(opt.dt > 0.0)) fail(ErrorKind::domain, "dt must be positive");
  S.check_admissible(z0);
  Trajectory traj;
  traj.times.reserve(opt.steps + 1);
  traj.states.reserve(opt.steps + 1);
  traj.times.push_back(0.0);
  traj.states.push_back(z0);
  State z = z0;
  for (std::size_t k = 1; k <= opt.steps; ++k) {
    z = advance(z, K, S, opt.dt, opt.scheme, opt.max_halvings, traj.rejections);
    traj.times.push_back(static_cast<double>(k) * opt.dt);
    traj.states.push_back(z);
  }
  return traj;
}

Trajectory run(const Problem& p, const RunOptions& opt) { return run(p.z0, p.K, p.S, opt); }

std::vector<State> time_derivative(const Trajectory& traj) {
  const std::size_t N = traj.size();
  std::vector<State> out;
  out.reserve(N);
  if (N == 0) return out;
  if (N == 1) {
    out.push_back(traj.states[0].zeros_like());
    return out;
  }
  for (std::size_t k = 0; k < N; ++k) {
    const std::size_t a = k == 0 ? 0 : k - 1;
    const std::size_t b = k + 1 == N ? k : k + 1;
    out.push_back((1.0 / (traj.times[b] - traj.times[a])) *
                  (traj.states[b] - traj.states[a]));
  }
  return out;
}

double conserved_total(const State& z, const MetricOp& K) {
  double s = 0.0;
  bool any = false;
  for (std::size_t k = 0; k < z.size(); ++k)
    if (K.is_conserved(k)) {
      s += total(z[k]);
      any = true;
    }
  if (!any)
    for (const Field& f : z) s += total(f);
  return s;
}

std::vector<Diagnostic> diagnostics(const Trajectory& traj, const MetricOp& K,
                                    const EntropyFunctional& S) {
  const std::size_t N = traj.size();
  std::vector<Diagnostic> out(N);
  const std::vector<State> zdot = time_derivative(traj);
  for (std::size_t k = 0; k < N; ++k) {
    const State& z = traj.states[k];
    const State DS = S.variational_derivative(z);
    out[k].t = traj.times[k];
    out[k].S = S.eval(z);
    out[k].mass = conserved_total(z, K);
    out[k].Phi = 0.5 * K.kinv_norm_sq(z, zdot[k]);
    out[k].Psi = 0.5 * inner(DS, K.apply(z, DS));
  }
  for (std::size_t k = 0; k < N && N > 1; ++k) {
    const std::size_t a = k == 0 ? 0 : k - 1;
    const std::size_t b = k + 1 == N ? k : k + 1;
    out[k].dSdt = (out[b].S - out[a].S) / (out[b].t - out[a].t);
  }
  return out;
}

std::string trajectory_csv(const Trajectory& traj, const std::vector<std::string>& names) {
  std::ostringstream os;
  os << "t,x,var,value\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const State& z = traj.states[k];
    const std::string t = format_double(traj.times[k]);
    for (std::size_t c = 0; c < z.size(); ++c) {
      const std::string var = c < names.size() ? names[c] : "z" + std::to_string(c);
      for (std::size_t i = 0; i < z.n_cells(); ++i)
        os << t << ',' << format_double(z.grid().cell_center(i)) << ',' << var << ','
           << format_double(z[c][i]) << '\n';
    }
  }
  return os.str();
}

std::string diagnostics_csv(const std::vector<Diagnostic>& d) {
  std::ostringstream os;
  os << "t,S,mass,Phi,Psi,dSdt\n";
  for (const Diagnostic& r : d)
    os << format_double(r.t) << ',' << format_double(r.S) << ',' << format_double(r.mass)
       << ',' << format_double(r.Phi) << ',' << format_double(r.Psi) << ','
       << format_double(r.dSdt) << '\n';
  return os.str();
}

MetricOp heat_metric_resistivity(const FluxField& H) {
  const Grid1D& g = H.grid();
  std::vector<double> m(H.size(), 0.0);
  for (std::size_t f = g.first_active_face(); f < g.end_active_face(); ++f) {
    if (!(H[f] > 0.0)) fail(ErrorKind::domain, "heat resistivity must be positive at face " +
                                                   std::to_string(f));
    m[f] = 0.5 / H[f];
  }
  const FluxField M(H.grid(), std::move(m));
  return MetricOp::wasserstein([M](const State& z, std::size_t) {
    require_same_grid(z.grid(), M.grid(), "heat metric");
    return M;
  });
}

MetricOp heat_metric_conductivity(double k, double c_v) {
  if (!(k > 0.0) || !(c_v > 0.0))
    fail(ErrorKind::domain, "conductivity and heat capacity must be positive");
  return MetricOp::wasserstein([k, c_v](const State& z, std::size_t c) {
    const FluxField TT = face_product(temperature_of(z[c], c_v));
    std::vector<double> m(TT.values().begin(), TT.values().end());
    for (double& x : m) x *= k;
    return FluxField(z.grid(), std::move(m));
  });
}

Problem heat_problem(const Field& T0, double c_v, MetricOp K) {
  if (!(c_v > 0.0)) fail(ErrorKind::domain, "c_v must be positive");
  const Grid1D& g = T0.grid();
  const Wall w = T0.wall();
  BoundaryCondition bc = g.bc();
  if (bc.kind == Boundary::dirichlet) {
    bc.left = c_v * w.left;
    bc.right = c_v * w.right;
  }
  const Grid1D ge(g.n_cells(), g.length(), bc);
  std::vector<double> e(T0.values().begin(), T0.values().end());
  for (double& x : e) x *= c_v;
  Problem p{State(Field(ge, std::move(e))), std::move(K), EntropyFunctional::thermal(c_v),
            {"e"}};
  p.S.check_admissible(p.z0);
  return p;
}

std::pair<Field, Field> heat_rates(const State& z, const MetricOp& K, double c_v) {
  const Field T = temperature_of(z[0], c_v);
  const FluxField M = K.face_mobility(z, 0);
  const FluxField TT = face_product(T);
  std::vector<double> kf(M.size());
  for (std::size_t f = 0; f < kf.size(); ++f) kf[f] = TT[f] > 0.0 ? M[f] / TT[f] : 0.0;
  const Field fourier = divergence(multiply(FluxField(z.grid(), std::move(kf)), gradient(T)));
  const Field onsager = -1.0 * divergence(heat_flux(z, K, c_v));
  return {fourier, onsager};
}

FluxField heat_flux(const State& z, const MetricOp& K, double c_v) {
  const Field T = temperature_of(z[0], c_v);
  Field invT(z.grid());
  for (std::size_t i = 0; i < T.size(); ++i) invT[i] = 1.0 / T[i];
  const Wall w = T.wall();
  if (z.grid().kind() == Boundary::dirichlet) invT.set_wall({1.0 / w.left, 1.0 / w.right});
  return onsager_flux(gradient(invT), K.face_mobility(z, 0));
}

HeatRun run_heat(const Problem& heat, const RunOptions& opt) {
  if (heat.S.variant() != EntropyFunctional::Variant::thermal)
    fail(ErrorKind::semantic, "heat run requires the thermal entropy");
  HeatRun out{run(heat, opt), {}};
  const double c_v = heat.S.c_v();
  for (std::size_t k = 0; k + 1 < out.traj.size(); ++k) {
    const State& z = out.traj.states[k];
    const auto [fourier, onsager] = heat_rates(z, heat.K, c_v);
    const State a(fourier), b(onsager);
    // near steady state div q cancels; measure against the flux divided by dx
    double scale = max_abs(b);
    const FluxField q = heat_flux(z, heat.K, c_v);
    for (double v : q.values()) scale = std::max(scale, std::abs(v) / z.grid().dx());
    const double diff = max_abs(a - b);
    out.cross_form_residual.push_back(scale > 0 ? diff / scale : diff);
  }
  return out;
}

Problem phase_field_problem(const Field& T0, const Field& phi0, const PhaseFieldParams& p,
                            const Field& eta, const FluxField& H) {
  const Grid1D& g = phi0.grid();
  require_same_grid(g, T0.grid(), "phase field");
  require_same_grid(g, eta.grid(), "phase field");
  require_same_grid(g, H.grid(), "phase field");
  if (!g.closed()) fail(ErrorKind::unsupported, "phase field requires a closed grid");
  std::vector<HBlock> blocks(g.n_cells());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (!(eta[i] > 0.0))
      fail(ErrorKind::domain, "eta must be positive at cell " + std::to_string(i));
    blocks[i].u = eta[i];
    blocks[i].uc = 0.0;
    if (MetricOp::paired(g, i)) {
      if (!(H[i] > 0.0))
        fail(ErrorKind::domain, "H must be positive at face " + std::to_string(i));
      blocks[i].c = H[i];
    }
  }
  Problem out{State{phi0, phase_energy(p, phi0, T0)},
              MetricOp::coupled([blocks](const State&) { return blocks; }),
              EntropyFunctional::phase_field(p),
              {"phi", "e"}};
  out.S.check_admissible(out.z0);
  return out;
}

Problem phase_field_isothermal_problem(const Field& T, const Field& phi0,
                                       const PhaseFieldParams& p, const Field& eta) {
  require_same_grid(phi0.grid(), eta.grid(), "phase field");
  Field m(eta.grid());
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!(eta[i] > 0.0))
      fail(ErrorKind::domain, "eta must be positive at cell " + std::to_string(i));
    m[i] = 0.5 / eta[i];
  }
  Problem out{State(phi0),
              MetricOp::l2m([m](const State&, std::size_t) { return m; }),
              EntropyFunctional::phase_field_isothermal(p, T),
              {"phi"}};
  out.S.check_admissible(out.z0);
  return out;
}

Trajectory run_phase_field(const Problem& pf, const RunOptions& opt) {
  if (pf.S.variant() != EntropyFunctional::Variant::phase_field)
    fail(ErrorKind::semantic, "phase field run requires the phase-field entropy");
  return run(pf, opt);
}

}  // namespace mepp
