#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "mepp/grid.hpp"

namespace mepp {

/// One or two fields evolving together. For coupled metrics the
/// non-conserved component comes first, the conserved one second.
class State {
 public:
  State() = default;
  State(std::initializer_list<Field> comps) : comps_(comps) { check(); }
  explicit State(std::vector<Field> comps) : comps_(std::move(comps)) { check(); }
  explicit State(Field f) { comps_.push_back(std::move(f)); }

  std::size_t size() const noexcept { return comps_.size(); }
  const Field& operator[](std::size_t k) const { return comps_[k]; }
  Field& operator[](std::size_t k) { return comps_[k]; }
  const Grid1D& grid() const { return comps_.front().grid(); }
  std::size_t n_cells() const { return grid().n_cells(); }
  /// Total number of scalar unknowns (components x cells).
  std::size_t dof() const { return size() * n_cells(); }

  auto begin() const { return comps_.begin(); }
  auto end() const { return comps_.end(); }

  State& operator+=(const State& o);
  State& operator-=(const State& o);
  State& operator*=(double s);

  bool all_finite() const noexcept;
  bool operator==(const State&) const = default;

  /// Same grid and component count, all values zero.
  State zeros_like() const;

 private:
  void check() const;

  std::vector<Field> comps_;
};

State operator+(State a, const State& b);
State operator-(State a, const State& b);
State operator*(double s, State a);

/// Sum of per-component L2 pairings.
double inner(const State& a, const State& b);
/// Largest absolute entry over all components.
double max_abs(const State& a);

}  // namespace mepp
