#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mepp/mepp.h"

namespace {

constexpr int kOk = 0;
constexpr int kModelError = 1;
constexpr int kUsage = 2;
constexpr int kTestFailure = 3;

// Used by `verify` when no model is given.
const char* kDefaultModel = R"(format = 1
[grid]
n = 64
length = 1
bc = periodic
[state.rho]
kind = conserved
ic = 1 + 0.5*sin(2*pi*x)
[functional]
variant = boltzmann
[metric]
variant = wasserstein
M = rho
face_mean = log_mean
[time]
dt = 1e-4
steps = 100
)";

struct ModelDel {
  void operator()(mepp_model* m) const { mepp_model_free(m); }
};
struct TrajDel {
  void operator()(mepp_trajectory* t) const { mepp_trajectory_free(t); }
};
struct StrDel {
  void operator()(char* s) const { mepp_string_free(s); }
};
using ModelPtr = std::unique_ptr<mepp_model, ModelDel>;
using TrajPtr = std::unique_ptr<mepp_trajectory, TrajDel>;
using StrPtr = std::unique_ptr<char, StrDel>;

// Thrown to unwind with a diagnostic already formatted.
struct Failure {
  int code;
};

void check(mepp_status s, const std::string& context) {
  if (s == MEPP_OK) return;
  std::cerr << "error (" << mepp_status_name(s) << "): " << context << ": " << mepp_last_error()
            << '\n';
  throw Failure{kModelError};
}

ModelPtr load(const std::string& path) {
  mepp_model* m = nullptr;
  check(mepp_model_load(path.c_str(), &m), path);
  return ModelPtr(m);
}

std::string read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "error (io): cannot open " << path << '\n';
    throw Failure{kModelError};
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const std::string& path, const char* text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    std::cerr << "error (io): cannot write " << path << '\n';
    throw Failure{kModelError};
  }
}

void emit(const std::string& out, const char* text) {
  if (out.empty() || out == "-") std::cout << text;
  else write(out, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entropy-production gradient flows: run, verify, sample, rate, check-fd"};
  app.require_subcommand(1);

  std::string model, path, run_out, sample_out, rate_out, fd_out;
  double dt = 0, epsilon = -1, n_sigma = 4;
  std::int64_t steps = -1;
  std::uint64_t seed = 0, trajectories = 100, draws = 10000, probes = 20;
  bool cholesky = false;

  auto* run = app.add_subcommand("run", "integrate the model; writes trajectory.csv and diagnostics.csv");
  run->add_option("--model", model, "model file")->required();
  run->add_option("--out", run_out, "output directory")->default_val(".");
  run->add_option("--dt", dt, "override the model time step");
  run->add_option("--steps", steps, "override the model step count");

  auto* verify = app.add_subcommand("verify", "invariant suite; exit 0 iff every check passes");
  verify->add_option("--model", model, "model file (default: built-in diffusion model)");
  verify->add_option("--seed", seed, "seed of the random test vectors")->default_val(1);

  auto* sample = app.add_subcommand("sample", "Euler-Maruyama ensemble and summary.json");
  sample->add_option("--model", model, "model file")->required();
  sample->add_option("--out", sample_out, "output directory")->default_val("sample_out");
  sample->add_option("--trajectories,-n", trajectories, "ensemble size")->default_val(100);
  sample->add_option("--epsilon", epsilon, "override the noise strength");
  auto* sample_seed = sample->add_option("--seed", seed, "override the model seed");
  sample->add_option("--dt", dt, "override the model time step");
  sample->add_option("--steps", steps, "override the model step count");
  sample->add_option("--fd-draws", draws, "draws of the fluctuation-dissipation probe (0: skip)")
      ->default_val(10000);
  sample->add_option("--fd-probes", probes, "probe vectors")->default_val(20);

  auto* rate = app.add_subcommand("rate", "rate functional of a path CSV");
  rate->add_option("--model", model, "model file")->required();
  rate->add_option("--path", path, "path CSV (t,x,var,value)")->required();
  rate->add_option("--out", rate_out, "report file (default: stdout)");

  auto* fd = app.add_subcommand("check-fd", "Monte-Carlo fluctuation-dissipation probe");
  fd->add_option("--model", model, "model file")->required();
  fd->add_option("--draws", draws, "noise increments")->default_val(10000);
  fd->add_option("--probes", probes, "probe vectors")->default_val(20);
  auto* fd_seed = fd->add_option("--seed", seed, "override the model seed");
  fd->add_option("--epsilon", epsilon, "override the noise strength");
  fd->add_option("--dt", dt, "override the model time step");
  fd->add_option("--n-sigma", n_sigma, "acceptance band in standard errors")->default_val(4);
  fd->add_flag("--cholesky", cholesky, "Cholesky block roots for coupled metrics");
  fd->add_option("--out", fd_out, "report file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (run->parsed()) {
      const ModelPtr m = load(model);
      mepp_trajectory* t = nullptr;
      check(mepp_run(m.get(), dt, steps, &t), "run");
      const TrajPtr traj(t);
      char* csv = nullptr;
      check(mepp_trajectory_csv(m.get(), traj.get(), &csv), "trajectory");
      const StrPtr csv_owner(csv);
      char* diag = nullptr;
      check(mepp_diagnostics_csv(m.get(), traj.get(), &diag), "diagnostics");
      const StrPtr diag_owner(diag);
      std::error_code ec;
      std::filesystem::create_directories(run_out, ec);
      write((std::filesystem::path(run_out) / "trajectory.csv").string(), csv);
      write((std::filesystem::path(run_out) / "diagnostics.csv").string(), diag);
      std::cout << "wrote " << mepp_trajectory_length(traj.get()) << " records to " << run_out
                << " (" << mepp_trajectory_rejections(traj.get()) << " halved steps)\n";
      return kOk;
    }
    if (verify->parsed()) {
      ModelPtr m;
      if (model.empty()) {
        mepp_model* raw = nullptr;
        check(mepp_model_parse(kDefaultModel, std::strlen(kDefaultModel), &raw), "built-in model");
        m.reset(raw);
      } else {
        m = load(model);
      }
      char* table = nullptr;
      int pass = 0;
      check(mepp_verify(m.get(), seed, &table, &pass), "verify");
      const StrPtr owner(table);
      std::cout << table;
      return pass ? kOk : kTestFailure;
    }
    if (sample->parsed()) {
      const ModelPtr m = load(model);
      mepp_sample_options o = mepp_sample_defaults();
      o.trajectories = trajectories;
      o.epsilon = epsilon;
      o.dt = dt;
      o.steps = steps;
      if (sample_seed->count() > 0) {
        o.seed = seed;
        o.use_model_seed = 0;
      }
      o.fd_draws = draws;
      o.fd_probes = probes;
      char* summary = nullptr;
      check(mepp_sample(m.get(), &o, sample_out.c_str(), &summary), "sample");
      const StrPtr owner(summary);
      write((std::filesystem::path(sample_out) / "summary.json").string(), summary);
      std::cout << "wrote " << trajectories << " trajectories and summary.json to " << sample_out << '\n';
      const auto j = nlohmann::json::parse(summary);
      const auto& verdict = j.at("fluctuation_dissipation");
      return verdict.is_object() && !verdict.at("pass").get<bool>() ? kTestFailure : kOk;
    }
    if (rate->parsed()) {
      const ModelPtr m = load(model);
      const std::string text = read(path);
      mepp_trajectory* t = nullptr;
      check(mepp_trajectory_parse_csv(m.get(), text.data(), text.size(), &t), path);
      const TrajPtr traj(t);
      char* report = nullptr;
      check(mepp_rate(m.get(), traj.get(), &report), "rate");
      const StrPtr owner(report);
      emit(rate_out, report);
      return kOk;
    }
    if (fd->parsed()) {
      const ModelPtr m = load(model);
      mepp_fd_options o = mepp_fd_defaults();
      o.draws = draws;
      o.probes = probes;
      o.epsilon = epsilon;
      o.dt = dt;
      o.n_sigma = n_sigma;
      o.cholesky = cholesky ? 1 : 0;
      if (fd_seed->count() > 0) {
        o.seed = seed;
        o.use_model_seed = 0;
      }
      char* report = nullptr;
      int pass = 0;
      check(mepp_check_fd(m.get(), &o, &report, &pass), "check-fd");
      const StrPtr owner(report);
      emit(fd_out, report);
      return pass ? kOk : kTestFailure;
    }
  } catch (const Failure& f) {
    return f.code;
  }
  return kUsage;
}
