#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mepp/evolve.hpp"

namespace mepp {

/// Small arithmetic language over x, pi, named variables, sin, cos, tanh,
/// exp, + - * / and numeric literals. Stored in postfix order.
class Expression {
 public:
  enum class Op : std::uint8_t { number, variable, neg, add, sub, mul, div, sin, cos, tanh, exp };

  struct Node {
    Op op = Op::number;
    double value = 0.0;
    std::string name;
    bool operator==(const Node&) const = default;
  };

  /// Throws ParseError(parse) with line/column on malformed input; column is
  /// the 1-based column of text[0].
  static Expression parse(std::string_view text, std::size_t line = 1, std::size_t column = 1);

  /// Canonical text; parse(text()) == *this.
  std::string text() const;
  /// Variable names other than x and pi, in first-use order.
  std::vector<std::string> variables() const;
  bool uses(std::string_view name) const;

  /// Evaluates with values for x and each name in `names` (same order as
  /// `values`). Unknown names are a semantic error.
  double eval(double x, const std::vector<std::string>& names,
              const std::vector<double>& values) const;

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  bool operator==(const Expression&) const = default;

 private:
  std::vector<Node> nodes_;
};

/// Cell-centre values of an expression in x alone; a non-finite value is a
/// domain error naming the cell.
Field eval_ic(const Expression& e, const Grid1D& g);

struct GridSpec {
  std::size_t n = 0;
  double length = 1.0;
  Boundary bc = Boundary::periodic;
  double left = 0.0;
  double right = 0.0;
  bool operator==(const GridSpec&) const = default;
};

struct StateSpec {
  std::string name;
  bool conserved = false;
  std::optional<Expression> ic;
  /// Initial temperature instead of an energy ic (thermal, phase field).
  std::optional<Expression> temperature;
  bool operator==(const StateSpec&) const = default;
};

struct FunctionalSpec {
  std::string variant;
  std::map<std::string, double> params;
  /// Frozen temperature of phase_field_isothermal.
  std::optional<Expression> T;
  bool operator==(const FunctionalSpec&) const = default;
};

struct MetricSpec {
  std::string variant;
  std::map<std::string, Expression> exprs;
  std::optional<FaceMean> face_mean;
  bool operator==(const MetricSpec&) const = default;
};

struct TimeSpec {
  double dt = 0.0;
  std::size_t steps = 0;
  Scheme scheme = Scheme::semi_implicit;
  bool operator==(const TimeSpec&) const = default;
};

struct NoiseSpec {
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  bool operator==(const NoiseSpec&) const = default;
};

struct ModelSpec {
  GridSpec grid;
  std::vector<StateSpec> states;  // file order
  FunctionalSpec functional;
  MetricSpec metric;
  TimeSpec time;
  std::optional<NoiseSpec> noise;
  bool operator==(const ModelSpec&) const = default;
};

/// Parses and validates a model file. Syntax errors carry ErrorKind::parse,
/// rule violations ErrorKind::semantic, both with line and column.
ModelSpec parse_model(std::string_view text);

/// Canonical text form; parse_model(serialize(s)) == s.
std::string serialize(const ModelSpec& s);

Grid1D make_grid(const GridSpec& g);

/// Initial state, metric and entropy. Coupled states are ordered
/// (non-conserved, conserved) whatever the file order.
Problem build_problem(const ModelSpec& s);

RunOptions run_options(const ModelSpec& s);

/// Reads a `t,x,var,value` CSV written by trajectory_csv back into a path on
/// the problem's grid. Rows must cover every (t, var, cell) exactly once.
Trajectory read_path_csv(std::string_view text, const Problem& p);

}  // namespace mepp
