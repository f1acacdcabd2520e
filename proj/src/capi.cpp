#include "mepp/mepp.h"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <sstream>

#include "json.hpp"
#include "mepp/error.hpp"
#include "mepp/ldp.hpp"
#include "mepp/modelio.hpp"
#include "mepp/stochastic.hpp"
#include "mepp/verify.hpp"

struct mepp_model {
  mepp::ModelSpec spec;
  mepp::Problem problem;
};

struct mepp_trajectory {
  mepp::Trajectory traj;
};

namespace {

using json = nlohmann::json;

thread_local std::string g_error;
thread_local std::size_t g_line = 0;
thread_local std::size_t g_column = 0;

mepp_status status_of(mepp::ErrorKind k) {
  switch (k) {
    case mepp::ErrorKind::usage: return MEPP_E_USAGE;
    case mepp::ErrorKind::parse: return MEPP_E_PARSE;
    case mepp::ErrorKind::semantic: return MEPP_E_SEMANTIC;
    case mepp::ErrorKind::domain: return MEPP_E_DOMAIN;
    case mepp::ErrorKind::range: return MEPP_E_RANGE;
    case mepp::ErrorKind::step_rejected: return MEPP_E_STEP_REJECTED;
    case mepp::ErrorKind::unsupported: return MEPP_E_UNSUPPORTED;
    case mepp::ErrorKind::io: return MEPP_E_IO;
  }
  return MEPP_E_INTERNAL;
}

mepp_status set_error(mepp_status s, const std::string& msg) {
  g_error = msg;
  return s;
}

template <class F>
mepp_status guard(F&& fn) {
  g_error.clear();
  g_line = g_column = 0;
  try {
    fn();
    return MEPP_OK;
  } catch (const mepp::ParseError& e) {
    g_line = e.line();
    g_column = e.column();
    return set_error(status_of(e.kind()), e.what());
  } catch (const mepp::Error& e) {
    return set_error(status_of(e.kind()), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return set_error(MEPP_E_IO, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(MEPP_E_MEMORY, "out of memory");
  } catch (const std::exception& e) {
    return set_error(MEPP_E_INTERNAL, e.what());
  } catch (...) {
    return set_error(MEPP_E_INTERNAL, "unknown error");
  }
}

void require(bool cond, const char* msg) {
  if (!cond) mepp::fail(mepp::ErrorKind::usage, msg);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

std::string read_file(const char* path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) mepp::fail(mepp::ErrorKind::io, std::string("cannot open ") + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) mepp::fail(mepp::ErrorKind::io, "cannot write " + path.string());
}

mepp_model* make_model(std::string_view text) {
  mepp::ModelSpec spec = mepp::parse_model(text);
  mepp::Problem p = mepp::build_problem(spec);
  return new mepp_model{std::move(spec), std::move(p)};
}

mepp::RunOptions options(const mepp_model* m, double dt, int64_t steps) {
  mepp::RunOptions o = mepp::run_options(m->spec);
  if (dt > 0) o.dt = dt;
  if (steps >= 0) o.steps = static_cast<std::size_t>(steps);
  return o;
}

json field_json(const mepp::Field& f) { return json(std::vector<double>(f.values().begin(), f.values().end())); }

json fd_json(const mepp::FdReport& r) {
  json probes = json::array();
  for (const auto& p : r.probes)
    probes.push_back({{"empirical", p.empirical},
                      {"predicted", p.predicted},
                      {"std_error", p.std_error},
                      {"mean", p.mean},
                      {"mean_std_error", p.mean_std_error}});
  return {{"pass", r.pass},
          {"n_sigma", r.n_sigma},
          {"max_sigma", r.max_sigma},
          {"max_mean_sigma", r.max_mean_sigma},
          {"max_mass_drift", r.max_mass_drift},
          {"probes", probes}};
}

}  // namespace

extern "C" {

const char* mepp_last_error(void) { return g_error.c_str(); }
size_t mepp_last_error_line(void) { return g_line; }
size_t mepp_last_error_column(void) { return g_column; }

const char* mepp_status_name(mepp_status s) {
  switch (s) {
    case MEPP_OK: return "ok";
    case MEPP_E_USAGE: return "usage";
    case MEPP_E_PARSE: return "parse";
    case MEPP_E_SEMANTIC: return "semantic";
    case MEPP_E_DOMAIN: return "domain";
    case MEPP_E_RANGE: return "range";
    case MEPP_E_STEP_REJECTED: return "step_rejected";
    case MEPP_E_UNSUPPORTED: return "unsupported";
    case MEPP_E_IO: return "io";
    case MEPP_E_MEMORY: return "memory";
    case MEPP_E_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* mepp_version(void) { return "0.1.0"; }

void mepp_string_free(char* s) { std::free(s); }

mepp_status mepp_model_parse(const char* text, size_t len, mepp_model** out) {
  return guard([&] {
    require(out != nullptr && (text != nullptr || len == 0), "null argument");
    *out = nullptr;
    *out = make_model(std::string_view(text ? text : "", len));
  });
}

mepp_status mepp_model_load(const char* path, mepp_model** out) {
  return guard([&] {
    require(out != nullptr && path != nullptr, "null argument");
    *out = nullptr;
    *out = make_model(read_file(path));
  });
}

void mepp_model_free(mepp_model* m) { delete m; }

mepp_status mepp_model_serialize(const mepp_model* m, char** out) {
  return guard([&] {
    require(m && out, "null argument");
    *out = dup_string(mepp::serialize(m->spec));
  });
}

size_t mepp_model_cells(const mepp_model* m) { return m ? m->problem.z0.n_cells() : 0; }
size_t mepp_model_components(const mepp_model* m) { return m ? m->problem.z0.size() : 0; }

mepp_status mepp_run(const mepp_model* m, double dt, int64_t steps, mepp_trajectory** out) {
  return guard([&] {
    require(m && out, "null argument");
    *out = nullptr;
    *out = new mepp_trajectory{mepp::run(m->problem, options(m, dt, steps))};
  });
}

void mepp_trajectory_free(mepp_trajectory* t) { delete t; }
size_t mepp_trajectory_length(const mepp_trajectory* t) { return t ? t->traj.size() : 0; }
size_t mepp_trajectory_rejections(const mepp_trajectory* t) { return t ? t->traj.rejections : 0; }

mepp_status mepp_trajectory_value(const mepp_trajectory* t, size_t j, size_t k, size_t i,
                                  double* out) {
  return guard([&] {
    require(t && out, "null argument");
    if (j >= t->traj.size() || k >= t->traj.states[j].size() ||
        i >= t->traj.states[j].n_cells())
      mepp::fail(mepp::ErrorKind::range, "index out of range");
    *out = t->traj.states[j][k][i];
  });
}

mepp_status mepp_trajectory_time(const mepp_trajectory* t, size_t j, double* out) {
  return guard([&] {
    require(t && out, "null argument");
    if (j >= t->traj.size()) mepp::fail(mepp::ErrorKind::range, "index out of range");
    *out = t->traj.times[j];
  });
}

mepp_status mepp_trajectory_csv(const mepp_model* m, const mepp_trajectory* t, char** out) {
  return guard([&] {
    require(m && t && out, "null argument");
    *out = dup_string(mepp::trajectory_csv(t->traj, m->problem.names));
  });
}

mepp_status mepp_diagnostics_csv(const mepp_model* m, const mepp_trajectory* t, char** out) {
  return guard([&] {
    require(m && t && out, "null argument");
    *out = dup_string(
        mepp::diagnostics_csv(mepp::diagnostics(t->traj, m->problem.K, m->problem.S)));
  });
}

mepp_status mepp_trajectory_parse_csv(const mepp_model* m, const char* text, size_t len,
                                      mepp_trajectory** out) {
  return guard([&] {
    require(m && out && (text || len == 0), "null argument");
    *out = nullptr;
    *out = new mepp_trajectory{
        mepp::read_path_csv(std::string_view(text ? text : "", len), m->problem)};
  });
}

mepp_status mepp_verify(const mepp_model* m, uint64_t seed, char** table, int* all_pass) {
  return guard([&] {
    require(m && table && all_pass, "null argument");
    const mepp::VerifyReport r =
        mepp::verify_problem(m->problem, mepp::run_options(m->spec), seed);
    *table = dup_string(mepp::format_table(r));
    *all_pass = r.pass() ? 1 : 0;
  });
}

mepp_status mepp_rate(const mepp_model* m, const mepp_trajectory* path, char** out) {
  return guard([&] {
    require(m && path && out, "null argument");
    const mepp::LdpReport r = mepp::rate_functional(path->traj, m->problem.K, m->problem.S);
    json series = json::array();
    for (const auto& s : r.series)
      series.push_back({{"t", s.t},
                        {"production", s.production},
                        {"Phi", s.Phi},
                        {"Psi", s.Psi},
                        {"gap", s.gap},
                        {"identity_residual", s.identity_residual}});
    const json j = {{"rate_value", r.rate_value},
                    {"identity_residual_max", r.identity_residual_max},
                    {"series", series}};
    *out = dup_string(j.dump(2) + "\n");
  });
}

mepp_fd_options mepp_fd_defaults(void) {
  mepp_fd_options o;
  o.epsilon = -1.0;
  o.dt = 0.0;
  o.draws = 10000;
  o.probes = 20;
  o.seed = 1;
  o.use_model_seed = 1;
  o.n_sigma = 4.0;
  o.cholesky = 0;
  return o;
}

mepp_status mepp_check_fd(const mepp_model* m, const mepp_fd_options* opt, char** out,
                          int* pass) {
  return guard([&] {
    require(m && opt && out && pass, "null argument");
    require(opt->draws >= 2 && opt->probes >= 1, "draws must be >= 2 and probes >= 1");
    const auto& noise = m->spec.noise;
    const double eps = opt->epsilon >= 0 ? opt->epsilon : noise ? noise->epsilon : 1.0;
    const double dt = opt->dt > 0 ? opt->dt : m->spec.time.dt;
    const std::uint64_t seed = opt->use_model_seed && noise ? noise->seed : opt->seed;
    const mepp::FdReport r = mepp::check_fluctuation_dissipation(
        m->problem.K, m->problem.z0, eps, dt, opt->draws, opt->probes, seed, opt->n_sigma,
        opt->cholesky ? mepp::RootMethod::cholesky : mepp::RootMethod::symmetric);
    json j = fd_json(r);
    j["epsilon"] = eps;
    j["dt"] = dt;
    j["draws"] = opt->draws;
    j["seed"] = seed;
    *out = dup_string(j.dump(2) + "\n");
    *pass = r.pass ? 1 : 0;
  });
}

mepp_sample_options mepp_sample_defaults(void) {
  mepp_sample_options o;
  o.trajectories = 100;
  o.epsilon = -1.0;
  o.dt = 0.0;
  o.steps = -1;
  o.seed = 1;
  o.use_model_seed = 1;
  o.fd_draws = 10000;
  o.fd_probes = 20;
  return o;
}

mepp_status mepp_sample(const mepp_model* m, const mepp_sample_options* opt,
                        const char* out_dir, char** summary) {
  return guard([&] {
    require(m && opt && summary, "null argument");
    require(opt->trajectories >= 1, "trajectories must be >= 1");
    const auto& noise = m->spec.noise;
    mepp::EnsembleOptions e;
    const mepp::RunOptions ro = options(m, opt->dt, opt->steps);
    e.dt = ro.dt;
    e.steps = ro.steps;
    e.trajectories = opt->trajectories;
    e.noise.epsilon = opt->epsilon >= 0 ? opt->epsilon : noise ? noise->epsilon : 0.0;
    e.noise.seed = opt->use_model_seed && noise ? noise->seed : opt->seed;
    e.keep_paths = out_dir != nullptr;
    const mepp::EnsembleResult r = mepp::sample_ensemble(m->problem, e);

    if (out_dir) {
      std::filesystem::create_directories(out_dir);
      for (std::size_t k = 0; k < r.paths.size(); ++k) {
        if (!r.completed[k]) continue;
        char name[32];
        std::snprintf(name, sizeof name, "traj_%05zu.csv", k);
        write_file(std::filesystem::path(out_dir) / name,
                   mepp::trajectory_csv(r.paths[k], m->problem.names));
      }
    }

    const mepp::State& z0 = m->problem.z0;
    json mean = json::object(), var = json::object();
    for (std::size_t c = 0; c < z0.size(); ++c) {
      mepp::Field mu(z0.grid()), sq(z0.grid());
      for (const mepp::State& s : r.finals)
        for (std::size_t i = 0; i < mu.size(); ++i) {
          mu[i] += s[c][i];
          sq[i] += s[c][i] * s[c][i];
        }
      const double n = static_cast<double>(r.finals.size());
      for (std::size_t i = 0; i < mu.size(); ++i) {
        mu[i] = n > 0 ? mu[i] / n : 0.0;
        sq[i] = n > 1 ? (sq[i] - n * mu[i] * mu[i]) / (n - 1) : 0.0;
      }
      mean[m->problem.names[c]] = field_json(mu);
      var[m->problem.names[c]] = field_json(sq);
    }
    std::size_t completed = 0;
    for (bool b : r.completed) completed += b ? 1 : 0;
    json j = {{"epsilon", e.noise.epsilon},
              {"seed", e.noise.seed},
              {"dt", e.dt},
              {"steps", e.steps},
              {"trajectories", e.trajectories},
              {"completed", completed},
              {"rejected_replicas", r.rejected_replicas},
              {"clamped_replicas", r.clamped_replicas},
              {"max_mass_drift", r.max_mass_drift},
              {"mean_final", mean},
              {"variance_final", var}};
    if (opt->fd_draws >= 2 && e.noise.epsilon > 0) {
      const mepp::FdReport fd = mepp::check_fluctuation_dissipation(
          m->problem.K, z0, e.noise.epsilon, e.dt, opt->fd_draws,
          std::max<std::uint64_t>(opt->fd_probes, 1), e.noise.seed);
      j["fluctuation_dissipation"] = fd_json(fd);
    } else {
      j["fluctuation_dissipation"] = nullptr;
    }
    *summary = dup_string(j.dump(2) + "\n");
  });
}

}  // extern "C"
