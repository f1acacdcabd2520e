#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "mepp/error.hpp"
#include "mepp/modelio.hpp"
#include "test_util.hpp"

using namespace mepp;
using mepp::test::kPi;

namespace {

const char* kMinimal = R"(format = 1
[grid]
n = 64
length = 1
bc = periodic
[state.rho]
kind = conserved
ic = 1+0.5*sin(2*pi*x)
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

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class F>
Error error_of(F fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected an error");
  return Error(ErrorKind::usage, "");
}

std::string random_expr(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth > 0 ? 9 : 2);
  std::uniform_real_distribution<double> num(0.0, 10.0);
  switch (pick(rng)) {
    case 0: return std::to_string(num(rng));
    case 1: return "x";
    case 2: return "pi";
    case 3: return "-" + random_expr(rng, depth - 1);
    case 4: return "(" + random_expr(rng, depth - 1) + ")+(" + random_expr(rng, depth - 1) + ")";
    case 5: return "(" + random_expr(rng, depth - 1) + ")-(" + random_expr(rng, depth - 1) + ")";
    case 6: return "(" + random_expr(rng, depth - 1) + ")*(" + random_expr(rng, depth - 1) + ")";
    case 7: return "(" + random_expr(rng, depth - 1) + ")/(" + random_expr(rng, depth - 1) + ")";
    case 8: return "sin(" + random_expr(rng, depth - 1) + ")";
    default: return "exp(" + random_expr(rng, depth - 1) + ")";
  }
}

}  // namespace

TEST_CASE("minimal diffusion model parses") {
  const ModelSpec s = parse_model(kMinimal);
  CHECK(s.grid.n == 64);
  CHECK(s.grid.bc == Boundary::periodic);
  REQUIRE(s.states.size() == 1);
  CHECK(s.states[0].name == "rho");
  CHECK(s.states[0].conserved);
  CHECK(s.functional.variant == "boltzmann");
  CHECK(s.metric.variant == "wasserstein");
  CHECK(s.metric.face_mean == FaceMean::log_mean);
  CHECK(s.time.dt == 1e-4);
  CHECK(s.time.steps == 100);
  CHECK(s.time.scheme == Scheme::semi_implicit);
  CHECK(!s.noise);
}

TEST_CASE("eval_ic at cell centres") {
  const Grid1D g(4, 1.0, BoundaryCondition::periodic());
  const Field f = eval_ic(Expression::parse("sin(2*pi*x)"), g);
  const double h = std::sqrt(0.5);
  CHECK(f[0] == doctest::Approx(h).epsilon(1e-15));
  CHECK(f[1] == doctest::Approx(h).epsilon(1e-15));
  CHECK(f[2] == doctest::Approx(-h).epsilon(1e-15));
  CHECK(f[3] == doctest::Approx(-h).epsilon(1e-15));

  const Field one = eval_ic(Expression::parse("1"), g);
  for (double v : one.values()) CHECK(v == 1.0);

  const Grid1D fine(50, 1.0, BoundaryCondition::no_flux());
  const Field front = eval_ic(Expression::parse("tanh((x-0.5)/0.1)"), fine);
  for (std::size_t i = 0; i < front.size(); ++i) {
    CHECK(std::abs(front[i]) < 1.0);
    if (i > 0) CHECK(front[i] > front[i - 1]);
  }
}

TEST_CASE("eval_ic division by zero names the cell") {
  const Grid1D g(4, 1.0, BoundaryCondition::periodic());
  try {
    eval_ic(Expression::parse("1/(x-0.375)"), g);
    FAIL("expected an error");
  } catch (const CellError& e) {
    CHECK(e.cell() == 1);
    CHECK(std::string(e.what()).find("cell 1") != std::string::npos);
  }
}

TEST_CASE("expression operators and precedence") {
  auto ev = [](const char* s, double x = 0.0) { return Expression::parse(s).eval(x, {}, {}); };
  CHECK(ev("1+2*3") == 7.0);
  CHECK(ev("(1+2)*3") == 9.0);
  CHECK(ev("8/4/2") == 1.0);
  CHECK(ev("2-3-4") == -5.0);
  CHECK(ev("-2*-3") == 6.0);
  CHECK(ev("--2") == 2.0);
  CHECK(ev("+x", 3.0) == 3.0);
  CHECK(ev("exp(0)+cos(0)") == 2.0);
  CHECK(ev("1.5e2") == 150.0);
  CHECK(ev("pi") == kPi);
  CHECK(Expression::parse("a*b").eval(0.0, {"a", "b"}, {2.0, 5.0}) == 10.0);
  CHECK(error_of([] { Expression::parse("y").eval(0.0, {}, {}); }).kind() == ErrorKind::semantic);
}

TEST_CASE("expression syntax errors carry line and column") {
  const std::vector<std::pair<const char*, std::size_t>> cases = {
      {"1+", 3}, {"1 + * 2", 5}, {"sin 2", 5}, {"log(2)", 1}, {"(1", 3}, {"2x", 2}, {"1e", 2}};
  for (const auto& [text, col] : cases) {
    CAPTURE(text);
    try {
      Expression::parse(text, 7, 1);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.kind() == ErrorKind::parse);
      CHECK(e.line() == 7);
      CHECK(e.column() == col);
    }
  }
  CHECK_THROWS_AS(Expression::parse(std::string(1000, '(') + "1" + std::string(1000, ')')),
                  ParseError);
}

TEST_CASE("canonical expression text round-trips") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::string src = random_expr(rng, 5);
    const Expression e = Expression::parse(src);
    const Expression back = Expression::parse(e.text());
    CHECK(back == e);
    CHECK(back.text() == e.text());
  }
  CHECK(Expression::parse("(a+b)+(c+d)").text() == "a+b+(c+d)");
  CHECK(Expression::parse("a-(b-c)").text() == "a-(b-c)");
  CHECK(Expression::parse("a/(b*c)").text() == "a/(b*c)");
  CHECK(Expression::parse("-(a*b)").text() == "-(a*b)");
  CHECK(Expression::parse("0.1").text() == "0.1");
}

TEST_CASE("duplicate section names both lines") {
  std::string text = kMinimal;
  text += "[grid]\nn = 8\n";
  const Error e = error_of([&] { parse_model(text); });
  CHECK(e.kind() == ErrorKind::semantic);
  const std::string msg = e.what();
  CHECK(msg.find("[grid]") != std::string::npos);
  CHECK(msg.find("lines 2 and 18") != std::string::npos);
}

TEST_CASE("wasserstein with a nonconserved state is a semantic error") {
  std::string text = kMinimal;
  text.replace(text.find("kind = conserved"), 16, "kind = nonconserved");
  const Error e = error_of([&] { parse_model(text); });
  CHECK(e.kind() == ErrorKind::semantic);
  CHECK(std::string(e.what()).find("wasserstein requires conserved state") != std::string::npos);
}

TEST_CASE("validation rules") {
  auto with = [](const std::string& from, const std::string& to) {
    std::string t = kMinimal;
    const auto p = t.find(from);
    REQUIRE(p != std::string::npos);
    t.replace(p, from.size(), to);
    return t;
  };
  auto kind_of = [](const std::string& t) { return error_of([&] { parse_model(t); }).kind(); };
  CHECK(kind_of(with("format = 1\n", "")) == ErrorKind::semantic);
  CHECK(kind_of(with("format = 1", "format = 2")) == ErrorKind::semantic);
  CHECK(kind_of(with("n = 64", "n = 64\nsize = 3")) == ErrorKind::semantic);
  CHECK(kind_of(with("n = 64", "n = 64\nn = 32")) == ErrorKind::semantic);
  CHECK(kind_of(with("n = 64", "n = 2")) == ErrorKind::semantic);
  CHECK(kind_of(with("n = 64", "n = -4")) == ErrorKind::parse);
  CHECK(kind_of(with("length = 1", "length = abc")) == ErrorKind::parse);
  CHECK(kind_of(with("bc = periodic", "bc = open")) == ErrorKind::semantic);
  CHECK(kind_of(with("M = rho", "M = rho*q")) == ErrorKind::semantic);
  CHECK(kind_of(with("M = rho", "M = rho\nH = 1")) == ErrorKind::semantic);
  CHECK(kind_of(with("variant = boltzmann", "variant = tsallis")) == ErrorKind::semantic);
  CHECK(kind_of(with("[time]", "[times]")) == ErrorKind::semantic);
  CHECK(kind_of(with("[time]", "[time")) == ErrorKind::parse);
  CHECK(kind_of(with("dt = 1e-4", "dt = 0")) == ErrorKind::semantic);
  CHECK(kind_of(with("dt = 1e-4", "dt")) == ErrorKind::parse);
  CHECK(kind_of(with("ic = 1+0.5*sin(2*pi*x)", "ic = 1+rho")) == ErrorKind::semantic);
  CHECK(kind_of(with("ic = 1+0.5*sin(2*pi*x)", "ic = 1+")) == ErrorKind::parse);
  CHECK(kind_of(with("rho\n", "rho \xc3\xa9\n")) == ErrorKind::parse);
  CHECK(kind_of(with("[metric]", "[metric]\nface_mean = median")) == ErrorKind::semantic);
  // comments and blank lines are ignored, including non-ASCII text in comments
  CHECK_NOTHROW(parse_model(with("[time]", "# caf\xc3\xa9\n\n[time]   # run length")));
  CHECK(kind_of(with("[state.rho]\nkind = conserved", "[state.rho]\nkind = nonconserved")) ==
        ErrorKind::semantic);
}

TEST_CASE("parse error positions") {
  std::string text = kMinimal;
  text.replace(text.find("ic = 1+0.5*sin(2*pi*x)"), 22, "ic = 1+0.5*sin(2*pi*x");
  try {
    parse_model(text);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 8);
    CHECK(e.column() == 22);
  }
}

TEST_CASE("metric and state cross rules") {
  const char* coupled = R"(format = 1
[grid]
n = 16
length = 1
bc = no_flux
[state.e]
kind = conserved
temperature = 1
[state.phi]
kind = nonconserved
ic = 0.5
[functional]
variant = phase_field
w = 1
kappa = 0.001
latent_heat = 0.5
T_m = 1
c_v = 1
[metric]
variant = coupled
H_u = 1
H_c = 2
[time]
dt = 0.001
steps = 10
)";
  const ModelSpec s = parse_model(coupled);
  const Problem p = build_problem(s);
  CHECK(p.names == std::vector<std::string>{"phi", "e"});
  CHECK(p.z0[0][3] == 0.5);
  // e = c_v T + w g(phi) - L p(phi) evaluated at T = 1, phi = 0.5
  const Field e = phase_energy(PhaseFieldParams{1, 1e-3, 0.5, 1, 1}, Field(p.z0.grid(), 0.5),
                               Field(p.z0.grid(), 1.0));
  CHECK(p.z0[1][3] == e[3]);

  std::string bad = coupled;
  bad.replace(bad.find("kind = conserved"), 16, "kind = nonconserved");
  CHECK(std::string(error_of([&] { parse_model(bad); }).what())
            .find("one conserved and one nonconserved") != std::string::npos);

  std::string l2 = coupled;
  l2.replace(l2.find("variant = coupled"), 17, "variant = l2m\nm = 1");
  CHECK(error_of([&] { parse_model(l2); }).kind() == ErrorKind::semantic);
}

TEST_CASE("shipped models round-trip and build") {
  for (const char* name : {"diffusion", "diffusion_l2", "heat", "phasefield"}) {
    CAPTURE(name);
    const std::string text = slurp(std::string(MEPP_MODELS_DIR) + "/" + name + ".mod");
    REQUIRE(!text.empty());
    const ModelSpec s = parse_model(text);
    const std::string canon = serialize(s);
    const ModelSpec back = parse_model(canon);
    CHECK(back == s);
    CHECK(serialize(back) == canon);
    const Problem p = build_problem(s);
    CHECK(p.z0.grid().n_cells() == s.grid.n);
    const State v = p.K.apply(p.z0, p.S.variational_derivative(p.z0));
    CHECK(std::isfinite(max_abs(v)));
  }
}

TEST_CASE("built diffusion model matches the direct construction") {
  const Problem p = build_problem(parse_model(kMinimal));
  const Grid1D g(64, 1.0, BoundaryCondition::periodic());
  const Field rho = test::field_from(g, [](double x) { return 1 + 0.5 * std::sin(2 * kPi * x); });
  CHECK(test::max_abs_diff(p.z0, State(rho)) == 0.0);
  const MetricOp K = MetricOp::wasserstein_state(1.0, FaceMean::log_mean);
  const EntropyFunctional S = EntropyFunctional::boltzmann();
  const State a = p.K.apply(p.z0, p.S.variational_derivative(p.z0));
  const State b = K.apply(State(rho), S.variational_derivative(State(rho)));
  CHECK(test::rel_diff(a, b) <= 1e-14);
}

TEST_CASE("heat model velocity is the discrete Laplacian of T") {
  const Problem p = build_problem(parse_model(slurp(std::string(MEPP_MODELS_DIR) + "/heat.mod")));
  const Field& T = p.z0[0];
  const double dx = T.grid().dx();
  const State v = p.K.apply(p.z0, p.S.variational_derivative(p.z0));
  const std::size_t n = T.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double l = i == 0 ? T[i] : T[i - 1];
    const double r = i + 1 == n ? T[i] : T[i + 1];
    CHECK(v[0][i] == doctest::Approx((l - 2 * T[i] + r) / (dx * dx)).epsilon(1e-10));
  }
}

TEST_CASE("path csv reads back an evolver trajectory") {
  const Problem p = build_problem(parse_model(kMinimal));
  const Trajectory tr = run(p, RunOptions{1e-4, 5, Scheme::semi_implicit});
  const Trajectory back = read_path_csv(trajectory_csv(tr, p.names), p);
  REQUIRE(back.times == tr.times);
  for (std::size_t k = 0; k < tr.size(); ++k)
    CHECK(test::max_abs_diff(back.states[k], tr.states[k]) == 0.0);
  CHECK_THROWS_AS(read_path_csv("t,x,v\n", p), ParseError);
  CHECK_THROWS_AS(read_path_csv("t,x,var,value\n0,0.3,rho,1\n", p), ParseError);
  CHECK_THROWS_AS(read_path_csv("t,x,var,value\n0,0.5078125,rho,1\n", p), Error);
}

TEST_CASE("parser fuzz smoke") {
  std::mt19937_64 rng(5);
  const std::string base = kMinimal;
  const std::string alphabet = "[]=#.+-*/()xe \n\t0123456789abcdefgrhoiMnpst_\x01\xff";
  std::uniform_int_distribution<std::size_t> ch(0, alphabet.size() - 1);
  for (int trial = 0; trial < 3000; ++trial) {
    std::string t = base;
    const int edits = 1 + static_cast<int>(rng() % 6);
    for (int k = 0; k < edits; ++k) {
      const std::size_t pos = rng() % (t.size() + 1);
      switch (rng() % 3) {
        case 0: t.insert(pos, 1, alphabet[ch(rng)]); break;
        case 1: if (pos < t.size()) t.erase(pos, 1); break;
        default: if (pos < t.size()) t[pos] = alphabet[ch(rng)];
      }
    }
    try {
      const ModelSpec s = parse_model(t);
      CHECK(parse_model(serialize(s)) == s);
    } catch (const Error&) {
    }
  }
}
