#include "mepp/state.hpp"

#include <cmath>

#include "mepp/error.hpp"

namespace mepp {

void State::check() const {
  for (const Field& f : comps_)
    require_same_grid(comps_.front().grid(), f.grid(), "State");
}

State& State::operator+=(const State& o) {
  if (o.size() != size()) fail(ErrorKind::usage, "State +=: component mismatch");
  for (std::size_t k = 0; k < size(); ++k) comps_[k] += o.comps_[k];
  return *this;
}

State& State::operator-=(const State& o) {
  if (o.size() != size()) fail(ErrorKind::usage, "State -=: component mismatch");
  for (std::size_t k = 0; k < size(); ++k) comps_[k] -= o.comps_[k];
  return *this;
}

State& State::operator*=(double s) {
  for (Field& f : comps_) f *= s;
  return *this;
}

bool State::all_finite() const noexcept {
  for (const Field& f : comps_)
    if (!f.all_finite()) return false;
  return true;
}

State State::zeros_like() const {
  std::vector<Field> z;
  for (const Field& f : comps_) z.emplace_back(f.grid(), 0.0);
  return State(std::move(z));
}

State operator+(State a, const State& b) { return a += b; }
State operator-(State a, const State& b) { return a -= b; }
State operator*(double s, State a) { return a *= s; }

double inner(const State& a, const State& b) {
  if (a.size() != b.size()) fail(ErrorKind::usage, "inner: component mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += inner(a[k], b[k]);
  return s;
}

double max_abs(const State& a) {
  double m = 0.0;
  for (const Field& f : a)
    for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace mepp
