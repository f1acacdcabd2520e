#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mepp/evolve.hpp"

namespace mepp {

struct CheckRow {
  std::string module;
  std::string name;
  double value = 0.0;      // worst observed error
  double tolerance = 0.0;
  bool pass = false;
};

struct VerifyReport {
  std::vector<CheckRow> rows;
  bool pass() const;
};

/// Invariant suite of the grid, functional, metric and MEPP layers on the
/// model's grid and state, plus a Lyapunov and conservation run with `opt`.
VerifyReport verify_problem(const Problem& p, const RunOptions& opt, std::uint64_t seed = 1);

/// Fixed-width pass/fail table, one row per check.
std::string format_table(const VerifyReport& r);

}  // namespace mepp
