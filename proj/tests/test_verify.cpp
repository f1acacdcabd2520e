#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mepp/modelio.hpp"
#include "mepp/verify.hpp"

using namespace mepp;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("verify suite passes on the shipped models") {
  for (const char* name : {"diffusion", "diffusion_l2", "heat", "phasefield"}) {
    CAPTURE(name);
    const ModelSpec s = parse_model(slurp(std::string(MEPP_MODELS_DIR) + "/" + name + ".mod"));
    const VerifyReport r = verify_problem(build_problem(s), run_options(s));
    for (const CheckRow& row : r.rows) {
      CAPTURE(row.module);
      CAPTURE(row.name);
      CAPTURE(row.value);
      CHECK(row.pass);
    }
    CHECK(r.rows.size() >= 8);
    CHECK(format_table(r).find("all checks passed") != std::string::npos);
  }
}

TEST_CASE("verify covers dirichlet grids") {
  const char* text = R"(format = 1
[grid]
n = 32
length = 1
bc = dirichlet
left = 1
right = 2
[state.e]
kind = conserved
ic = 1 + x + 0.2*sin(pi*x)
[functional]
variant = thermal
c_v = 1
[metric]
variant = wasserstein
M = e*e
face_mean = geometric
[time]
dt = 1e-4
steps = 200
)";
  const ModelSpec s = parse_model(text);
  const VerifyReport r = verify_problem(build_problem(s), run_options(s));
  for (const CheckRow& row : r.rows) {
    CAPTURE(row.name);
    CAPTURE(row.value);
    CHECK(row.pass);
  }
}

TEST_CASE("verify reports a failing row") {
  VerifyReport r;
  r.rows.push_back({"grid", "x", 1.0, 0.5, false});
  CHECK(!r.pass());
  CHECK(format_table(r).find("FAIL") != std::string::npos);
}
