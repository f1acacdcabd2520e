#include "mepp/modelio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mepp/error.hpp"

namespace mepp {

// --- expressions -------------------------------------------------------------

namespace {

constexpr int kMaxDepth = 200;

bool is_ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::optional<double> strict_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<std::uint64_t> strict_uint(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

class ExprParser {
 public:
  ExprParser(std::string_view s, std::size_t line, std::size_t col,
             std::vector<Expression::Node>& out)
      : s_(s), line_(line), col_(col), out_(out) {}

  void run() {
    skip();
    if (pos_ == s_.size()) error("empty expression");
    expr();
    skip();
    if (pos_ != s_.size()) error(std::string("unexpected '") + s_[pos_] + "'");
  }

 private:
  [[noreturn]] void error(const std::string& msg) const {
    throw ParseError(ErrorKind::parse, line_, col_ + pos_, msg);
  }
  void skip() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void push(Expression::Op op, double v = 0.0, std::string name = {}) {
    out_.push_back({op, v, std::move(name)});
  }
  void enter() {
    if (++depth_ > kMaxDepth) error("expression nested too deeply");
  }

  void expr() {
    enter();
    term();
    for (;;) {
      if (accept('+')) {
        term();
        push(Expression::Op::add);
      } else if (accept('-')) {
        term();
        push(Expression::Op::sub);
      } else {
        break;
      }
    }
    --depth_;
  }
  void term() {
    unary();
    for (;;) {
      if (accept('*')) {
        unary();
        push(Expression::Op::mul);
      } else if (accept('/')) {
        unary();
        push(Expression::Op::div);
      } else {
        break;
      }
    }
  }
  void unary() {
    enter();
    if (accept('-')) {
      unary();
      push(Expression::Op::neg);
    } else if (accept('+')) {
      unary();
    } else {
      primary();
    }
    --depth_;
  }
  void primary() {
    skip();
    if (pos_ >= s_.size()) error("expected a number, name or '('");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      expr();
      if (!accept(')')) error("expected ')'");
      return;
    }
    if (is_digit(c) || c == '.') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (is_digit(s_[pos_]) || s_[pos_] == '.')) ++pos_;
      if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
        std::size_t q = pos_ + 1;
        if (q < s_.size() && (s_[q] == '+' || s_[q] == '-')) ++q;
        if (q < s_.size() && is_digit(s_[q])) {
          pos_ = q;
          while (pos_ < s_.size() && is_digit(s_[pos_])) ++pos_;
        }
      }
      const auto v = strict_double(s_.substr(start, pos_ - start));
      if (!v) {
        pos_ = start;
        error("malformed or out-of-range number");
      }
      push(Expression::Op::number, *v);
      return;
    }
    if (is_ident_start(c)) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && is_ident_char(s_[pos_])) ++pos_;
      const std::string name(s_.substr(start, pos_ - start));
      skip();
      if (pos_ < s_.size() && s_[pos_] == '(') {
        Expression::Op op;
        if (name == "sin") op = Expression::Op::sin;
        else if (name == "cos") op = Expression::Op::cos;
        else if (name == "tanh") op = Expression::Op::tanh;
        else if (name == "exp") op = Expression::Op::exp;
        else {
          pos_ = start;
          error("unknown function '" + name + "'");
        }
        ++pos_;
        expr();
        if (!accept(')')) error("expected ')'");
        push(op);
        return;
      }
      push(Expression::Op::variable, 0.0, name);
      return;
    }
    error(std::string("unexpected '") + c + "'");
  }

  std::string_view s_;
  std::size_t line_, col_;
  std::vector<Expression::Node>& out_;
  std::size_t pos_ = 0;
  int depth_ = 0;
};

// Postfix evaluation with variable slots resolved up front.
class Bound {
 public:
  Bound(const Expression& e, const std::vector<std::string>& names) : nodes_(&e.nodes()) {
    slots_.reserve(nodes_->size());
    for (const auto& n : *nodes_) {
      int slot = -3;
      if (n.op == Expression::Op::variable) {
        if (n.name == "x") slot = -1;
        else if (n.name == "pi") slot = -2;
        else {
          const auto it = std::find(names.begin(), names.end(), n.name);
          if (it == names.end())
            fail(ErrorKind::semantic, "unknown variable '" + n.name + "'");
          slot = static_cast<int>(it - names.begin());
        }
      }
      slots_.push_back(slot);
    }
    stack_.resize(nodes_->size() + 1);
  }

  double operator()(double x, const double* values) const {
    std::size_t sp = 0;
    for (std::size_t i = 0; i < nodes_->size(); ++i) {
      const auto& n = (*nodes_)[i];
      switch (n.op) {
        case Expression::Op::number: stack_[sp++] = n.value; break;
        case Expression::Op::variable:
          stack_[sp++] = slots_[i] == -1   ? x
                         : slots_[i] == -2 ? std::numbers::pi
                                           : values[slots_[i]];
          break;
        case Expression::Op::neg: stack_[sp - 1] = -stack_[sp - 1]; break;
        case Expression::Op::sin: stack_[sp - 1] = std::sin(stack_[sp - 1]); break;
        case Expression::Op::cos: stack_[sp - 1] = std::cos(stack_[sp - 1]); break;
        case Expression::Op::tanh: stack_[sp - 1] = std::tanh(stack_[sp - 1]); break;
        case Expression::Op::exp: stack_[sp - 1] = std::exp(stack_[sp - 1]); break;
        default: {
          const double b = stack_[--sp];
          double& a = stack_[sp - 1];
          if (n.op == Expression::Op::add) a += b;
          else if (n.op == Expression::Op::sub) a -= b;
          else if (n.op == Expression::Op::mul) a *= b;
          else a /= b;
        }
      }
    }
    return stack_[0];
  }

 private:
  const std::vector<Expression::Node>* nodes_;
  std::vector<int> slots_;
  mutable std::vector<double> stack_;
};

}  // namespace

Expression Expression::parse(std::string_view text, std::size_t line, std::size_t column) {
  Expression e;
  ExprParser(text, line, column, e.nodes_).run();
  return e;
}

std::string Expression::text() const {
  // prec: 0 add/sub, 1 mul/div, 2 unary minus, 3 atoms and calls
  std::vector<std::pair<std::string, int>> st;
  for (const Node& n : nodes_) {
    switch (n.op) {
      case Op::number: st.emplace_back(format_double(n.value), 3); break;
      case Op::variable: st.emplace_back(n.name, 3); break;
      case Op::neg: {
        auto a = std::move(st.back());
        st.back() = {"-" + (a.second <= 1 ? "(" + a.first + ")" : a.first), 2};
        break;
      }
      case Op::sin:
      case Op::cos:
      case Op::tanh:
      case Op::exp: {
        const char* f = n.op == Op::sin ? "sin" : n.op == Op::cos ? "cos" : n.op == Op::tanh ? "tanh" : "exp";
        st.back() = {std::string(f) + "(" + st.back().first + ")", 3};
        break;
      }
      default: {
        auto b = std::move(st.back());
        st.pop_back();
        auto a = std::move(st.back());
        const bool additive = n.op == Op::add || n.op == Op::sub;
        const int p = additive ? 0 : 1;
        const char sym = n.op == Op::add ? '+' : n.op == Op::sub ? '-' : n.op == Op::mul ? '*' : '/';
        const std::string l = a.second < p ? "(" + a.first + ")" : a.first;
        const std::string r = b.second <= p ? "(" + b.first + ")" : b.first;
        st.back() = {l + sym + r, p};
      }
    }
  }
  return st.empty() ? std::string() : st.back().first;
}

std::vector<std::string> Expression::variables() const {
  std::vector<std::string> out;
  for (const Node& n : nodes_)
    if (n.op == Op::variable && n.name != "x" && n.name != "pi" &&
        std::find(out.begin(), out.end(), n.name) == out.end())
      out.push_back(n.name);
  return out;
}

bool Expression::uses(std::string_view name) const {
  return std::any_of(nodes_.begin(), nodes_.end(), [&](const Node& n) {
    return n.op == Op::variable && n.name == name;
  });
}

double Expression::eval(double x, const std::vector<std::string>& names,
                        const std::vector<double>& values) const {
  if (names.size() != values.size()) fail(ErrorKind::usage, "eval: names/values mismatch");
  return Bound(*this, names)(x, values.data());
}

Field eval_ic(const Expression& e, const Grid1D& g) {
  const Bound f(e, {});
  Field out(g);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = f(g.cell_center(i), nullptr);
    if (!std::isfinite(out[i]))
      throw CellError(0, i, "expression '" + e.text() + "' is not finite at cell " +
                                std::to_string(i));
  }
  return out;
}

// --- model files -------------------------------------------------------------

namespace {

struct Entry {
  std::string key;
  std::string value;
  std::size_t line = 0;
  std::size_t value_col = 0;
  bool used = false;
};

struct Section {
  std::string name;
  std::size_t line = 0;
  std::vector<Entry> entries;
};

[[noreturn]] void semantic(std::size_t line, std::size_t col, const std::string& msg) {
  throw ParseError(ErrorKind::semantic, line, col, msg);
}

class SectionReader {
 public:
  explicit SectionReader(Section& s) : s_(s) {}

  Entry* find(const std::string& key) {
    for (Entry& e : s_.entries)
      if (e.key == key) {
        e.used = true;
        return &e;
      }
    return nullptr;
  }
  Entry& require(const std::string& key) {
    Entry* e = find(key);
    if (!e) semantic(s_.line, 1, "[" + s_.name + "] is missing key '" + key + "'");
    return *e;
  }
  double number(Entry& e) {
    const auto v = strict_double(e.value);
    if (!v) throw ParseError(ErrorKind::parse, e.line, e.value_col,
                             "expected a number for '" + e.key + "'");
    return *v;
  }
  double number(const std::string& key) { return number(require(key)); }
  std::uint64_t integer(const std::string& key) {
    Entry& e = require(key);
    const auto v = strict_uint(e.value);
    if (!v) throw ParseError(ErrorKind::parse, e.line, e.value_col,
                             "expected a nonnegative integer for '" + key + "'");
    return *v;
  }
  std::string ident(Entry& e) {
    if (e.value.empty() || !is_ident_start(e.value[0]) ||
        !std::all_of(e.value.begin(), e.value.end(), is_ident_char))
      throw ParseError(ErrorKind::parse, e.line, e.value_col,
                       "expected a name for '" + e.key + "'");
    return e.value;
  }
  std::string ident(const std::string& key) { return ident(require(key)); }
  Expression expr(Entry& e) { return Expression::parse(e.value, e.line, e.value_col); }
  void finish() {
    for (const Entry& e : s_.entries)
      if (!e.used) semantic(e.line, 1, "unknown key '" + e.key + "' in [" + s_.name + "]");
  }
  const Section& section() const { return s_; }

 private:
  Section& s_;
};

std::string trim(std::string_view s, std::size_t& offset) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  offset = a;
  return std::string(s.substr(a, b - a));
}

bool valid_name(std::string_view s) {
  return !s.empty() && is_ident_start(s[0]) && std::all_of(s.begin(), s.end(), is_ident_char);
}

struct Document {
  std::vector<Entry> top;
  std::vector<Section> sections;
  std::size_t last_line = 1;
};

Document split(std::string_view text) {
  Document doc;
  std::size_t line_no = 0, start = 0;
  Section* current = nullptr;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view raw = text.substr(start, end - start);
    const std::size_t hash = raw.find('#');
    if (hash != std::string_view::npos) raw = raw.substr(0, hash);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const auto c = static_cast<unsigned char>(raw[i]);
      if ((c < 0x20 && c != '\t' && c != '\r') || c >= 0x7f)
        throw ParseError(ErrorKind::parse, line_no, i + 1, "invalid character");
    }
    std::size_t off = 0;
    const std::string line = trim(raw, off);
    if (!line.empty()) {
      if (line[0] == '[') {
        if (line.back() != ']')
          throw ParseError(ErrorKind::parse, line_no, off + line.size(), "expected ']'");
        std::size_t inner_off = 0;
        const std::string name = trim(std::string_view(line).substr(1, line.size() - 2), inner_off);
        const bool known = name == "grid" || name == "functional" || name == "metric" ||
                           name == "time" || name == "noise" ||
                           (name.rfind("state.", 0) == 0 && valid_name(name.substr(6)));
        if (!known) semantic(line_no, off + 1, "unknown section [" + name + "]");
        for (const Section& s : doc.sections)
          if (s.name == name)
            semantic(line_no, off + 1,
                     "duplicate section [" + name + "] at lines " + std::to_string(s.line) +
                         " and " + std::to_string(line_no));
        doc.sections.push_back({name, line_no, {}});
        current = &doc.sections.back();
      } else {
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
          throw ParseError(ErrorKind::parse, line_no, off + 1, "expected 'key = value'");
        std::size_t koff = 0, voff = 0;
        const std::string key = trim(std::string_view(line).substr(0, eq), koff);
        const std::string value = trim(std::string_view(line).substr(eq + 1), voff);
        if (!valid_name(key))
          throw ParseError(ErrorKind::parse, line_no, off + 1, "expected a key name");
        if (value.empty())
          throw ParseError(ErrorKind::parse, line_no, off + eq + 2, "missing value");
        std::vector<Entry>& list = current ? current->entries : doc.top;
        for (const Entry& e : list)
          if (e.key == key)
            semantic(line_no, off + 1,
                     "duplicate key '" + key + "' at lines " + std::to_string(e.line) +
                         " and " + std::to_string(line_no));
        list.push_back({key, value, line_no, off + eq + 2 + voff, false});
      }
    }
    doc.last_line = line_no;
    if (end == text.size()) break;
    start = end + 1;
  }
  return doc;
}

const std::vector<std::string>& functional_params(const std::string& v) {
  static const std::vector<std::string> none, thermal{"c_v"},
      phase{"c_v", "kappa", "latent_heat", "T_m", "w"};
  if (v == "thermal") return thermal;
  if (v == "phase_field" || v == "phase_field_isothermal") return phase;
  return none;
}

}  // namespace

ModelSpec parse_model(std::string_view text) {
  Document doc = split(text);
  ModelSpec spec;

  // format header
  {
    const Entry* fmt = nullptr;
    for (Entry& e : doc.top) {
      if (e.key != "format")
        semantic(e.line, 1, "key '" + e.key + "' outside of a section");
      fmt = &e;
    }
    if (!fmt) semantic(1, 1, "missing 'format = 1'");
    if (fmt->value != "1")
      throw ParseError(ErrorKind::semantic, fmt->line, fmt->value_col,
                       "unsupported format version '" + fmt->value + "'");
  }

  auto section = [&](const std::string& name) -> Section* {
    for (Section& s : doc.sections)
      if (s.name == name) return &s;
    return nullptr;
  };
  auto required = [&](const std::string& name) -> Section& {
    Section* s = section(name);
    if (!s) semantic(doc.last_line, 1, "missing section [" + name + "]");
    return *s;
  };

  // [grid]
  Section& grid_sec = required("grid");
  {
    SectionReader r(grid_sec);
    const std::uint64_t n = r.integer("n");
    if (n < 3 || n > 1000000) semantic(r.require("n").line, 1, "n must be in [3, 1000000]");
    spec.grid.n = static_cast<std::size_t>(n);
    spec.grid.length = r.number("length");
    if (!(spec.grid.length > 0.0)) semantic(r.require("length").line, 1, "length must be positive");
    Entry& bc = r.require("bc");
    const std::string b = r.ident(bc);
    if (b == "periodic") spec.grid.bc = Boundary::periodic;
    else if (b == "no_flux") spec.grid.bc = Boundary::no_flux;
    else if (b == "dirichlet") spec.grid.bc = Boundary::dirichlet;
    else semantic(bc.line, bc.value_col, "bc must be periodic, no_flux or dirichlet");
    if (spec.grid.bc == Boundary::dirichlet) {
      spec.grid.left = r.number("left");
      spec.grid.right = r.number("right");
    }
    r.finish();
  }

  // [state.NAME]
  std::vector<std::size_t> state_lines;
  for (Section& s : doc.sections) {
    if (s.name.rfind("state.", 0) != 0) continue;
    SectionReader r(s);
    StateSpec st;
    st.name = s.name.substr(6);
    if (st.name == "x" || st.name == "pi" || st.name == "sin" || st.name == "cos" ||
        st.name == "tanh" || st.name == "exp")
      semantic(s.line, 1, "reserved state name '" + st.name + "'");
    Entry& kind = r.require("kind");
    const std::string k = r.ident(kind);
    if (k == "conserved") st.conserved = true;
    else if (k != "nonconserved")
      semantic(kind.line, kind.value_col, "kind must be conserved or nonconserved");
    Entry* ic = r.find("ic");
    Entry* temp = r.find("temperature");
    if ((ic != nullptr) == (temp != nullptr))
      semantic(s.line, 1, "[" + s.name + "] needs exactly one of 'ic' or 'temperature'");
    Entry& e = ic ? *ic : *temp;
    Expression ex = r.expr(e);
    for (const std::string& v : ex.variables())
      semantic(e.line, e.value_col, "initial condition may only use x and pi, found '" + v + "'");
    (ic ? st.ic : st.temperature) = std::move(ex);
    r.finish();
    spec.states.push_back(std::move(st));
    state_lines.push_back(s.line);
  }
  if (spec.states.empty()) semantic(doc.last_line, 1, "missing section [state.NAME]");
  if (spec.states.size() > 2) semantic(state_lines[2], 1, "at most two states are supported");

  // [functional]
  Section& fsec = required("functional");
  {
    SectionReader r(fsec);
    Entry& v = r.require("variant");
    spec.functional.variant = r.ident(v);
    const std::string& fv = spec.functional.variant;
    if (fv != "dirichlet" && fv != "boltzmann" && fv != "thermal" && fv != "phase_field" &&
        fv != "phase_field_isothermal")
      semantic(v.line, v.value_col, "unknown functional variant '" + fv + "'");
    for (const std::string& p : functional_params(fv)) {
      Entry& e = r.require(p);
      const double x = r.number(e);
      const bool positive = p == "c_v" || p == "T_m";
      if (positive ? !(x > 0.0) : (p != "latent_heat" && !(x >= 0.0)))
        semantic(e.line, e.value_col, "'" + p + "' out of range");
      spec.functional.params[p] = x;
    }
    if (fv == "phase_field_isothermal") {
      Entry& e = r.require("T");
      Expression ex = r.expr(e);
      for (const std::string& name : ex.variables())
        semantic(e.line, e.value_col, "T may only use x and pi, found '" + name + "'");
      spec.functional.T = std::move(ex);
    }
    r.finish();
  }

  // [metric]
  Section& msec = required("metric");
  {
    SectionReader r(msec);
    Entry& v = r.require("variant");
    spec.metric.variant = r.ident(v);
    const std::string& mv = spec.metric.variant;
    std::vector<std::string> alternatives;  // exactly one required
    std::vector<std::string> optional_keys;
    std::vector<std::string> required_keys;
    if (mv == "l2m") alternatives = {"m", "eta"};
    else if (mv == "wasserstein") alternatives = {"M", "H"};
    else if (mv == "coupled") {
      required_keys = {"H_u", "H_c"};
      optional_keys = {"H_uc"};
    } else semantic(v.line, v.value_col, "unknown metric variant '" + mv + "'");
    std::vector<std::string> state_names;
    for (const StateSpec& s : spec.states) state_names.push_back(s.name);
    auto take = [&](Entry& e) {
      Expression ex = r.expr(e);
      for (const std::string& name : ex.variables())
        if (std::find(state_names.begin(), state_names.end(), name) == state_names.end())
          semantic(e.line, e.value_col, "unknown variable '" + name + "'");
      spec.metric.exprs.emplace(e.key, std::move(ex));
    };
    if (!alternatives.empty()) {
      Entry* a = r.find(alternatives[0]);
      Entry* b = r.find(alternatives[1]);
      if ((a != nullptr) == (b != nullptr))
        semantic(msec.line, 1, mv + " metric needs exactly one of '" + alternatives[0] +
                                   "' or '" + alternatives[1] + "'");
      take(a ? *a : *b);
    }
    for (const std::string& k : required_keys) take(r.require(k));
    for (const std::string& k : optional_keys)
      if (Entry* e = r.find(k)) take(*e);
    if (Entry* fm = r.find("face_mean")) {
      if (mv != "wasserstein") semantic(fm->line, 1, "face_mean only applies to wasserstein");
      const std::string m = r.ident(*fm);
      if (m == "arithmetic") spec.metric.face_mean = FaceMean::arithmetic;
      else if (m == "log_mean") spec.metric.face_mean = FaceMean::log_mean;
      else if (m == "geometric") spec.metric.face_mean = FaceMean::geometric;
      else semantic(fm->line, fm->value_col, "face_mean must be arithmetic, log_mean or geometric");
    }
    r.finish();
  }

  // [time]
  {
    Section& tsec = required("time");
    SectionReader r(tsec);
    Entry& dt = r.require("dt");
    spec.time.dt = r.number(dt);
    if (!(spec.time.dt > 0.0)) semantic(dt.line, dt.value_col, "dt must be positive");
    const std::uint64_t steps = r.integer("steps");
    if (steps > 1000000000ull) semantic(r.require("steps").line, 1, "steps too large");
    spec.time.steps = static_cast<std::size_t>(steps);
    if (Entry* sc = r.find("scheme")) {
      const std::string s = r.ident(*sc);
      if (s == "explicit") spec.time.scheme = Scheme::explicit_euler;
      else if (s == "semi_implicit") spec.time.scheme = Scheme::semi_implicit;
      else semantic(sc->line, sc->value_col, "scheme must be explicit or semi_implicit");
    }
    r.finish();
  }

  // [noise]
  if (Section* nsec = section("noise")) {
    SectionReader r(*nsec);
    NoiseSpec n;
    Entry& eps = r.require("epsilon");
    n.epsilon = r.number(eps);
    if (!(n.epsilon >= 0.0)) semantic(eps.line, eps.value_col, "epsilon must be >= 0");
    n.seed = r.integer("seed");
    r.finish();
    spec.noise = n;
  }

  // cross-section rules
  const std::string& mv = spec.metric.variant;
  const std::string& fv = spec.functional.variant;
  std::size_t n_cons = 0;
  for (const StateSpec& s : spec.states) n_cons += s.conserved ? 1 : 0;
  const std::size_t n_non = spec.states.size() - n_cons;
  if (mv == "wasserstein") {
    if (n_cons == 0) semantic(msec.line, 1, "wasserstein requires conserved state");
    if (spec.states.size() != 1) semantic(msec.line, 1, "wasserstein takes exactly one state");
  }
  if (mv == "l2m" && n_cons > 0) semantic(msec.line, 1, "l2m requires nonconserved state");
  if (mv == "coupled") {
    if (n_cons != 1 || n_non != 1)
      semantic(msec.line, 1, "coupled requires one conserved and one nonconserved state");
    if (spec.grid.bc == Boundary::dirichlet)
      semantic(msec.line, 1, "coupled metric requires a closed grid");
  }
  if (fv == "phase_field") {
    if (mv != "coupled") semantic(fsec.line, 1, "phase_field requires the coupled metric");
  }
  if (fv == "phase_field_isothermal") {
    if (mv != "l2m" || spec.states.size() != 1)
      semantic(fsec.line, 1, "phase_field_isothermal requires one state and the l2m metric");
  }
  if ((fv == "phase_field" || fv == "phase_field_isothermal") &&
      spec.grid.bc == Boundary::dirichlet)
    semantic(fsec.line, 1, "phase field requires a closed grid");
  for (std::size_t k = 0; k < spec.states.size(); ++k) {
    const StateSpec& s = spec.states[k];
    if (s.temperature && !(s.conserved && (fv == "thermal" || fv == "phase_field")))
      semantic(state_lines[k], 1,
               "'temperature' needs a conserved state under thermal or phase_field");
    if (fv == "phase_field" && s.conserved && !s.temperature && !s.ic)
      semantic(state_lines[k], 1, "missing initial energy");
  }
  return spec;
}

std::string serialize(const ModelSpec& s) {
  std::ostringstream os;
  os << "format = 1\n\n[grid]\n";
  os << "n = " << s.grid.n << "\nlength = " << format_double(s.grid.length)
     << "\nbc = " << to_string(s.grid.bc) << '\n';
  if (s.grid.bc == Boundary::dirichlet)
    os << "left = " << format_double(s.grid.left) << "\nright = " << format_double(s.grid.right)
       << '\n';
  for (const StateSpec& st : s.states) {
    os << "\n[state." << st.name << "]\nkind = " << (st.conserved ? "conserved" : "nonconserved")
       << '\n';
    if (st.ic) os << "ic = " << st.ic->text() << '\n';
    if (st.temperature) os << "temperature = " << st.temperature->text() << '\n';
  }
  os << "\n[functional]\nvariant = " << s.functional.variant << '\n';
  for (const auto& [k, v] : s.functional.params) os << k << " = " << format_double(v) << '\n';
  if (s.functional.T) os << "T = " << s.functional.T->text() << '\n';
  os << "\n[metric]\nvariant = " << s.metric.variant << '\n';
  for (const auto& [k, e] : s.metric.exprs) os << k << " = " << e.text() << '\n';
  if (s.metric.face_mean) os << "face_mean = " << to_string(*s.metric.face_mean) << '\n';
  os << "\n[time]\ndt = " << format_double(s.time.dt) << "\nsteps = " << s.time.steps
     << "\nscheme = " << to_string(s.time.scheme) << '\n';
  if (s.noise)
    os << "\n[noise]\nepsilon = " << format_double(s.noise->epsilon)
       << "\nseed = " << s.noise->seed << '\n';
  return os.str();
}

Grid1D make_grid(const GridSpec& g) {
  BoundaryCondition bc;
  switch (g.bc) {
    case Boundary::periodic: bc = BoundaryCondition::periodic(); break;
    case Boundary::no_flux: bc = BoundaryCondition::no_flux(); break;
    case Boundary::dirichlet: bc = BoundaryCondition::dirichlet(g.left, g.right); break;
  }
  return Grid1D(g.n, g.length, bc);
}

namespace {

PhaseFieldParams phase_params(const FunctionalSpec& f) {
  PhaseFieldParams p;
  p.c_v = f.params.at("c_v");
  p.kappa = f.params.at("kappa");
  p.latent_heat = f.params.at("latent_heat");
  p.T_m = f.params.at("T_m");
  p.w = f.params.at("w");
  return p;
}

// Cellwise values of a metric expression over the state (names in state
// order). Dirichlet walls are evaluated at the wall positions.
Field cell_values(const Expression& e, const std::vector<std::string>& names, const State& z) {
  const Bound f(e, names);
  const Grid1D& g = z.grid();
  Field out(g);
  std::vector<double> vals(z.size());
  for (std::size_t i = 0; i < g.n_cells(); ++i) {
    for (std::size_t k = 0; k < z.size(); ++k) vals[k] = z[k][i];
    out[i] = f(g.cell_center(i), vals.data());
    if (!std::isfinite(out[i]))
      throw CellError(0, i, "metric expression '" + e.text() + "' is not finite at cell " +
                                std::to_string(i));
  }
  if (g.kind() == Boundary::dirichlet) {
    for (std::size_t k = 0; k < z.size(); ++k) vals[k] = z[k].wall().left;
    const double l = f(0.0, vals.data());
    for (std::size_t k = 0; k < z.size(); ++k) vals[k] = z[k].wall().right;
    const double r = f(g.length(), vals.data());
    out.set_wall({l, r});
  }
  return out;
}

Field half_inverse(Field h, const char* what) {
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!(h[i] > 0.0))
      throw CellError(0, i, std::string(what) + " must be positive at cell " + std::to_string(i));
    h[i] = 0.5 / h[i];
  }
  if (h.grid().kind() == Boundary::dirichlet) {
    const Wall w = h.wall();
    if (!(w.left > 0.0) || !(w.right > 0.0))
      fail(ErrorKind::domain, std::string(what) + " must be positive at the walls");
    h.set_wall({0.5 / w.left, 0.5 / w.right});
  }
  return h;
}

}  // namespace

Problem build_problem(const ModelSpec& s) {
  const Grid1D g = make_grid(s.grid);
  const std::string& fv = s.functional.variant;
  const std::string& mv = s.metric.variant;

  std::vector<std::size_t> order(s.states.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  if (mv == "coupled" && s.states[0].conserved) std::swap(order[0], order[1]);
  std::vector<std::string> names;
  for (std::size_t k : order) names.push_back(s.states[k].name);

  EntropyFunctional S = EntropyFunctional::dirichlet();
  if (fv == "boltzmann") S = EntropyFunctional::boltzmann();
  else if (fv == "thermal") S = EntropyFunctional::thermal(s.functional.params.at("c_v"));
  else if (fv == "phase_field") S = EntropyFunctional::phase_field(phase_params(s.functional));
  else if (fv == "phase_field_isothermal")
    S = EntropyFunctional::phase_field_isothermal(phase_params(s.functional),
                                                  eval_ic(*s.functional.T, g));

  // Initial fields; energies given by temperature need phi first.
  std::vector<Field> fields(order.size(), Field(g));
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const StateSpec& st = s.states[order[pos]];
    if (st.ic) fields[pos] = eval_ic(*st.ic, g);
  }
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const StateSpec& st = s.states[order[pos]];
    if (!st.temperature) continue;
    const Field T = eval_ic(*st.temperature, g);
    if (fv == "thermal") {
      fields[pos] = s.functional.params.at("c_v") * T;
    } else {
      fields[pos] = phase_energy(phase_params(s.functional), fields[0], T);
    }
  }
  State z0{std::vector<Field>(fields)};

  auto expr = [&](const char* key) -> const Expression* {
    const auto it = s.metric.exprs.find(key);
    return it == s.metric.exprs.end() ? nullptr : &it->second;
  };
  std::optional<MetricOp> K;
  if (mv == "l2m") {
    const bool via_eta = expr("eta") != nullptr;
    const Expression e = via_eta ? *expr("eta") : *expr("m");
    K = MetricOp::l2m([e, names, via_eta](const State& z, std::size_t) {
      Field m = cell_values(e, names, z);
      return via_eta ? half_inverse(std::move(m), "eta") : m;
    });
  } else if (mv == "wasserstein") {
    const bool via_H = expr("H") != nullptr;
    const Expression e = via_H ? *expr("H") : *expr("M");
    const FaceMean rule = s.metric.face_mean.value_or(FaceMean::arithmetic);
    K = MetricOp::wasserstein([e, names, via_H, rule](const State& z, std::size_t) {
      Field m = cell_values(e, names, z);
      if (via_H) m = half_inverse(std::move(m), "H");
      return face_mobility(rule, m);
    });
  } else {
    const Expression hu = *expr("H_u"), hc = *expr("H_c");
    const std::optional<Expression> huc =
        expr("H_uc") ? std::optional<Expression>(*expr("H_uc")) : std::nullopt;
    K = MetricOp::coupled([hu, hc, huc, names](const State& z) {
      const Field u = cell_values(hu, names, z), c = cell_values(hc, names, z);
      const Field uc = huc ? cell_values(*huc, names, z) : Field(z.grid(), 0.0);
      std::vector<HBlock> blocks(z.n_cells());
      for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i] = {u[i], c[i], uc[i]};
      return blocks;
    });
  }
  Problem p{std::move(z0), std::move(*K), std::move(S), std::move(names)};
  p.S.check_admissible(p.z0);
  return p;
}

RunOptions run_options(const ModelSpec& s) {
  RunOptions o;
  o.dt = s.time.dt;
  o.steps = s.time.steps;
  o.scheme = s.time.scheme;
  return o;
}

Trajectory read_path_csv(std::string_view text, const Problem& p) {
  const Grid1D& g = p.z0.grid();
  const std::size_t n = g.n_cells(), C = p.z0.size();
  Trajectory tr;
  std::vector<std::vector<char>> seen;
  std::size_t line_no = 0, start = 0;
  bool header = false;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!header) {
      if (line != "t,x,var,value")
        throw ParseError(ErrorKind::parse, line_no, 1, "expected header 't,x,var,value'");
      header = true;
      continue;
    }
    std::string_view cols[4];
    std::size_t col_start[4] = {0, 0, 0, 0};
    std::size_t pos = 0;
    for (int c = 0; c < 4; ++c) {
      const std::size_t comma = c < 3 ? line.find(',', pos) : std::string_view::npos;
      if (c < 3 && comma == std::string_view::npos)
        throw ParseError(ErrorKind::parse, line_no, line.size() + 1, "expected 4 columns");
      col_start[c] = pos + 1;
      cols[c] = line.substr(pos, comma == std::string_view::npos ? std::string_view::npos
                                                                 : comma - pos);
      pos = comma + 1;
    }
    const auto t = strict_double(cols[0]);
    const auto x = strict_double(cols[1]);
    const auto v = strict_double(cols[3]);
    if (!t) throw ParseError(ErrorKind::parse, line_no, col_start[0], "bad time");
    if (!x) throw ParseError(ErrorKind::parse, line_no, col_start[1], "bad position");
    if (!v) throw ParseError(ErrorKind::parse, line_no, col_start[3], "bad value");
    const auto it = std::find(p.names.begin(), p.names.end(), std::string(cols[2]));
    if (it == p.names.end())
      throw ParseError(ErrorKind::semantic, line_no, col_start[2],
                       "unknown variable '" + std::string(cols[2]) + "'");
    const auto k = static_cast<std::size_t>(it - p.names.begin());
    const double fi = *x / g.dx() - 0.5;
    const long i = std::lround(fi);
    if (i < 0 || static_cast<std::size_t>(i) >= n || std::abs(fi - static_cast<double>(i)) > 1e-6)
      throw ParseError(ErrorKind::semantic, line_no, col_start[1], "position is not a cell centre");
    if (tr.times.empty() || *t != tr.times.back()) {
      if (!tr.times.empty() && !(*t > tr.times.back()))
        throw ParseError(ErrorKind::semantic, line_no, col_start[0], "times must increase");
      tr.times.push_back(*t);
      tr.states.push_back(p.z0.zeros_like());
      seen.emplace_back(C * n, 0);
    }
    char& mark = seen.back()[k * n + static_cast<std::size_t>(i)];
    if (mark) throw ParseError(ErrorKind::semantic, line_no, 1, "duplicate row");
    mark = 1;
    tr.states.back()[k][static_cast<std::size_t>(i)] = *v;
  }
  if (!header) throw ParseError(ErrorKind::parse, 1, 1, "empty path file");
  for (std::size_t s = 0; s < seen.size(); ++s)
    if (std::find(seen[s].begin(), seen[s].end(), 0) != seen[s].end())
      fail(ErrorKind::semantic, "path is missing values at t = " + format_double(tr.times[s]));
  if (tr.times.empty()) fail(ErrorKind::semantic, "path has no rows");
  return tr;
}

}  // namespace mepp
