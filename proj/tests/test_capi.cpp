#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "mepp/mepp.h"

namespace {

const std::string kModels = MEPP_MODELS_DIR;

std::string take(char* s) {
  std::string out(s ? s : "");
  mepp_string_free(s);
  return out;
}

mepp_model* load(const std::string& name) {
  mepp_model* m = nullptr;
  REQUIRE(mepp_model_load((kModels + "/" + name + ".mod").c_str(), &m) == MEPP_OK);
  return m;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("parse errors report status, line and column") {
  const char* text = "format = 1\n[grid]\nn = 8\nlength = 1\nbc = periodic\n[grid]\n";
  mepp_model* m = reinterpret_cast<mepp_model*>(0x1);
  CHECK(mepp_model_parse(text, std::strlen(text), &m) == MEPP_E_SEMANTIC);
  CHECK(m == nullptr);
  CHECK(mepp_last_error_line() == 6);
  CHECK(std::string(mepp_last_error()).find("lines 2 and 6") != std::string::npos);

  const char* bad = "format = 1\n[grid]\nn = 8x\n";
  CHECK(mepp_model_parse(bad, std::strlen(bad), &m) == MEPP_E_PARSE);
  CHECK(mepp_last_error_line() == 3);
  CHECK(mepp_last_error_column() == 5);

  CHECK(mepp_model_load("/nonexistent/model.mod", &m) == MEPP_E_IO);
  CHECK(mepp_model_parse(nullptr, 3, &m) == MEPP_E_USAGE);
  CHECK(std::string(mepp_status_name(MEPP_E_DOMAIN)) == "domain");
}

TEST_CASE("successful calls clear the last error") {
  mepp_model* m = nullptr;
  CHECK(mepp_model_parse("x", 1, &m) != MEPP_OK);
  CHECK(std::strlen(mepp_last_error()) > 0);
  m = load("diffusion");
  CHECK(std::strlen(mepp_last_error()) == 0);
  CHECK(mepp_model_cells(m) == 64);
  CHECK(mepp_model_components(m) == 1);
  mepp_model_free(m);
}

TEST_CASE("serialize round-trips through the C API") {
  for (const char* name : {"diffusion", "diffusion_l2", "heat", "phasefield"}) {
    CAPTURE(name);
    mepp_model* m = load(name);
    char* s = nullptr;
    REQUIRE(mepp_model_serialize(m, &s) == MEPP_OK);
    const std::string canon = take(s);
    mepp_model* m2 = nullptr;
    REQUIRE(mepp_model_parse(canon.data(), canon.size(), &m2) == MEPP_OK);
    REQUIRE(mepp_model_serialize(m2, &s) == MEPP_OK);
    CHECK(take(s) == canon);
    mepp_model_free(m2);
    mepp_model_free(m);
  }
}

TEST_CASE("run, csv output and path round trip") {
  mepp_model* m = load("diffusion");
  mepp_trajectory* t = nullptr;
  REQUIRE(mepp_run(m, -1, 10, &t) == MEPP_OK);
  CHECK(mepp_trajectory_length(t) == 11);
  double v = 0, time = 0;
  CHECK(mepp_trajectory_time(t, 10, &time) == MEPP_OK);
  CHECK(time == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(mepp_trajectory_value(t, 0, 0, 0, &v) == MEPP_OK);
  CHECK(v == doctest::Approx(1 + 0.5 * std::sin(2 * M_PI / 128)).epsilon(1e-15));
  CHECK(mepp_trajectory_value(t, 11, 0, 0, &v) == MEPP_E_RANGE);

  char* csv = nullptr;
  REQUIRE(mepp_trajectory_csv(m, t, &csv) == MEPP_OK);
  const std::string text = take(csv);
  CHECK(text.rfind("t,x,var,value\n", 0) == 0);
  char* diag = nullptr;
  REQUIRE(mepp_diagnostics_csv(m, t, &diag) == MEPP_OK);
  CHECK(take(diag).rfind("t,S,mass,Phi,Psi,dSdt\n", 0) == 0);

  mepp_trajectory* back = nullptr;
  REQUIRE(mepp_trajectory_parse_csv(m, text.data(), text.size(), &back) == MEPP_OK);
  REQUIRE(mepp_trajectory_csv(m, back, &csv) == MEPP_OK);
  CHECK(take(csv) == text);

  char* rate = nullptr;
  REQUIRE(mepp_rate(m, back, &rate) == MEPP_OK);
  const std::string report = take(rate);
  CHECK(report.find("\"rate_value\"") != std::string::npos);
  CHECK(report.find("\"identity_residual_max\"") != std::string::npos);
  CHECK(report.find("\"series\"") != std::string::npos);

  mepp_trajectory_free(back);
  mepp_trajectory_free(t);
  mepp_model_free(m);
}

TEST_CASE("run output is byte-identical across runs") {
  mepp_model* m = load("heat");
  std::string first;
  for (int rep = 0; rep < 2; ++rep) {
    mepp_trajectory* t = nullptr;
    REQUIRE(mepp_run(m, -1, 50, &t) == MEPP_OK);
    char* csv = nullptr;
    REQUIRE(mepp_trajectory_csv(m, t, &csv) == MEPP_OK);
    const std::string s = take(csv);
    if (rep == 0) first = s;
    else CHECK(s == first);
    mepp_trajectory_free(t);
  }
  mepp_model_free(m);
}

TEST_CASE("verify through the C API") {
  mepp_model* m = load("phasefield");
  char* table = nullptr;
  int pass = 0;
  REQUIRE(mepp_verify(m, 3, &table, &pass) == MEPP_OK);
  const std::string t = take(table);
  CHECK(pass == 1);
  CHECK(t.find("PASS") != std::string::npos);
  CHECK(t.find("FAIL") == std::string::npos);
  mepp_model_free(m);
}

TEST_CASE("check-fd and sample are deterministic given the seed") {
  mepp_model* m = load("diffusion_l2");
  mepp_fd_options fo = mepp_fd_defaults();
  fo.draws = 2000;
  char* r1 = nullptr;
  char* r2 = nullptr;
  int p1 = 0, p2 = 0;
  REQUIRE(mepp_check_fd(m, &fo, &r1, &p1) == MEPP_OK);
  REQUIRE(mepp_check_fd(m, &fo, &r2, &p2) == MEPP_OK);
  CHECK(take(r1) == take(r2));
  CHECK(p1 == 1);

  const auto dir = std::filesystem::temp_directory_path() / "mepp_capi_sample";
  std::filesystem::remove_all(dir);
  mepp_sample_options so = mepp_sample_defaults();
  so.trajectories = 8;
  so.fd_draws = 500;
  char* s1 = nullptr;
  char* s2 = nullptr;
  REQUIRE(mepp_sample(m, &so, (dir / "a").c_str(), &s1) == MEPP_OK);
  REQUIRE(mepp_sample(m, &so, (dir / "b").c_str(), &s2) == MEPP_OK);
  CHECK(take(s1) == take(s2));
  for (int k = 0; k < 8; ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "traj_%05d.csv", k);
    const std::string a = slurp(dir / "a" / name);
    CHECK(!a.empty());
    CHECK(a == slurp(dir / "b" / name));
  }
  std::filesystem::remove_all(dir);

  so.trajectories = 0;
  CHECK(mepp_sample(m, &so, nullptr, &s1) == MEPP_E_USAGE);
  mepp_model_free(m);
}

TEST_CASE("path csv errors are parse diagnostics") {
  mepp_model* m = load("diffusion");
  mepp_trajectory* t = nullptr;
  const char* bad = "t,x,var,value\n0,zz,rho,1\n";
  CHECK(mepp_trajectory_parse_csv(m, bad, std::strlen(bad), &t) == MEPP_E_PARSE);
  CHECK(t == nullptr);
  CHECK(mepp_last_error_line() == 2);
  mepp_model_free(m);
}
