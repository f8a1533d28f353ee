#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "algpde/errors.hpp"

namespace algpde {

// Sparse multivariate polynomial with double coefficients, keyed by exponent
// vectors. The term map is canonical: merged exponents, no zero coefficients,
// deterministic (ordered) iteration.
class Polynomial {
 public:
  using Exponents = std::vector<int>;

  Polynomial() = default;
  explicit Polynomial(std::vector<std::string> vars) : vars_(std::move(vars)) {}

  static Polynomial constant(double value, std::vector<std::string> vars) {
    Polynomial p(std::move(vars));
    if (value != 0.0) p.terms_[Exponents(p.vars_.size(), 0)] = value;
    return p;
  }

  static Polynomial variable(int index, const std::vector<std::string>& vars) {
    Polynomial p(vars);
    Exponents e(vars.size(), 0);
    e[static_cast<std::size_t>(index)] = 1;
    p.terms_[e] = 1.0;
    return p;
  }

  // Parses a polynomial expression: +, -, *, ^ with nonnegative integer
  // exponents, parentheses, and division by constant subexpressions.
  static Polynomial parse(const std::string& text, const std::vector<std::string>& vars);

  const std::vector<std::string>& variables() const { return vars_; }
  int nvars() const { return static_cast<int>(vars_.size()); }
  bool is_zero() const { return terms_.empty(); }
  std::size_t term_count() const { return terms_.size(); }
  const std::map<Exponents, double>& terms() const { return terms_; }

  bool is_constant(double* value = nullptr) const {
    if (terms_.empty()) {
      if (value) *value = 0.0;
      return true;
    }
    if (terms_.size() == 1 && total_degree_of(terms_.begin()->first) == 0) {
      if (value) *value = terms_.begin()->second;
      return true;
    }
    return false;
  }

  int total_degree() const {
    int deg = -1;
    for (const auto& [e, c] : terms_) deg = std::max(deg, total_degree_of(e));
    return deg;
  }

  double coefficient(const Exponents& e) const {
    auto it = terms_.find(e);
    return it == terms_.end() ? 0.0 : it->second;
  }

  void set_coefficient(const Exponents& e, double c) {
    if (c == 0.0)
      terms_.erase(e);
    else
      terms_[e] = c;
  }

  double evaluate(const double* x) const {
    double sum = 0.0;
    for (const auto& [e, c] : terms_) {
      double t = c;
      for (std::size_t k = 0; k < e.size(); ++k) t *= int_pow(x[k], e[k]);
      sum += t;
    }
    return sum;
  }

  double evaluate(const std::vector<double>& x) const { return evaluate(x.data()); }

  template <typename EigenVec>
  double evaluate_vec(const EigenVec& x) const {
    return evaluate(x.data());
  }

  Polynomial derivative(int var) const {
    Polynomial out(vars_);
    const auto v = static_cast<std::size_t>(var);
    for (const auto& [e, c] : terms_) {
      if (e[v] == 0) continue;
      Exponents d = e;
      d[v] -= 1;
      out.add_term(d, c * e[v]);
    }
    return out;
  }

  std::vector<Polynomial> gradient() const {
    std::vector<Polynomial> g;
    g.reserve(vars_.size());
    for (int k = 0; k < nvars(); ++k) g.push_back(derivative(k));
    return g;
  }

  std::vector<std::vector<Polynomial>> hessian() const {
    std::vector<std::vector<Polynomial>> h(vars_.size());
    for (int i = 0; i < nvars(); ++i) {
      Polynomial di = derivative(i);
      h[static_cast<std::size_t>(i)].reserve(vars_.size());
      for (int j = 0; j < nvars(); ++j)
        h[static_cast<std::size_t>(i)].push_back(di.derivative(j));
    }
    return h;
  }

  Polynomial operator-() const {
    Polynomial out(vars_);
    for (const auto& [e, c] : terms_) out.terms_[e] = -c;
    return out;
  }

  Polynomial& operator+=(const Polynomial& rhs) {
    require_same_vars(rhs);
    for (const auto& [e, c] : rhs.terms_) add_term(e, c);
    return *this;
  }

  Polynomial& operator-=(const Polynomial& rhs) {
    require_same_vars(rhs);
    for (const auto& [e, c] : rhs.terms_) add_term(e, -c);
    return *this;
  }

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    a.require_same_vars(b);
    Polynomial out(a.vars_);
    for (const auto& [ea, ca] : a.terms_)
      for (const auto& [eb, cb] : b.terms_) {
        Exponents e = ea;
        for (std::size_t k = 0; k < e.size(); ++k) e[k] += eb[k];
        out.add_term(e, ca * cb);
      }
    return out;
  }

  friend Polynomial operator*(double s, const Polynomial& p) {
    Polynomial out(p.vars_);
    if (s == 0.0) return out;
    for (const auto& [e, c] : p.terms_) out.terms_[e] = s * c;
    return out;
  }

  Polynomial pow(int n) const {
    if (n < 0) throw Error("polynomial power with negative exponent");
    Polynomial result = constant(1.0, vars_);
    Polynomial base = *this;
    while (n > 0) {
      if (n & 1) result = result * base;
      base = (n >>= 1) ? base * base : base;
    }
    return result;
  }

  // p(x + s): recentering used for local analysis at a point s.
  Polynomial translated(const std::vector<double>& shift) const {
    Polynomial cur = *this;
    for (int v = 0; v < nvars(); ++v) {
      double s = shift[static_cast<std::size_t>(v)];
      if (s == 0.0) continue;
      cur = cur.shift_one_var(v, s);
    }
    return cur;
  }

  // Lowest-degree homogeneous part, ignoring coefficients below drop_tol
  // relative to the largest coefficient (numerical noise from recentering
  // at an approximately computed point).
  Polynomial lowest_form(double drop_tol) const {
    double scale = 0.0;
    for (const auto& [e, c] : terms_) scale = std::max(scale, std::abs(c));
    if (scale == 0.0) return Polynomial(vars_);
    int low = -1;
    for (const auto& [e, c] : terms_) {
      if (std::abs(c) <= drop_tol * scale) continue;
      int d = total_degree_of(e);
      if (low < 0 || d < low) low = d;
    }
    Polynomial out(vars_);
    if (low < 0) return out;
    for (const auto& [e, c] : terms_)
      if (total_degree_of(e) == low && std::abs(c) > drop_tol * scale) out.terms_[e] = c;
    return out;
  }

  // Deterministic printable form; parse(to_string()) reproduces the value.
  std::string to_string() const;

  static int total_degree_of(const Exponents& e) {
    int d = 0;
    for (int k : e) d += k;
    return d;
  }

 private:
  static double int_pow(double base, int n) {
    double r = 1.0;
    while (n > 0) {
      if (n & 1) r *= base;
      base *= base;
      n >>= 1;
    }
    return r;
  }

  void require_same_vars(const Polynomial& rhs) const {
    if (vars_ != rhs.vars_) throw Error("polynomial arithmetic across different variable lists");
  }

  void add_term(const Exponents& e, double c) {
    auto it = terms_.find(e);
    if (it == terms_.end()) {
      if (c != 0.0) terms_[e] = c;
    } else {
      it->second += c;
      if (it->second == 0.0) terms_.erase(it);
    }
  }

  Polynomial shift_one_var(int var, double s) const {
    const auto v = static_cast<std::size_t>(var);
    Polynomial out(vars_);
    for (const auto& [e, c] : terms_) {
      int n = e[v];
      // binomial expansion of (x + s)^n
      double binom = 1.0;
      double spow = 1.0;
      for (int j = n; j >= 0; --j) {
        Exponents t = e;
        t[v] = j;
        out.add_term(t, c * binom * spow);
        binom *= static_cast<double>(j) / static_cast<double>(n - j + 1);
        spow *= s;
      }
    }
    return out;
  }

  std::vector<std::string> vars_;
  std::map<Exponents, double> terms_;
};

namespace detail {

inline std::string format_double(double v) {
  if (v == static_cast<std::int64_t>(v) && std::abs(v) < 1e15) {
    return std::to_string(static_cast<std::int64_t>(v));
  }
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct PolyTokenizer {
  const std::string& text;
  std::size_t pos = 0;

  explicit PolyTokenizer(const std::string& t) : text(t) {}

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }

  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }

  bool consume(char c) {
    if (peek() == c) {
      ++pos;
      return true;
    }
    return false;
  }
};

}  // namespace detail

namespace poly_parser {

// Grammar:
//   expr    := term (('+' | '-') term)*
//   term    := factor (('*' | '/') factor)*
//   factor  := ('-' | '+')* base ('^' integer)*
//   base    := number | identifier | '(' expr ')'
// Division is restricted to constant divisors.

inline Polynomial parse_expr(detail::PolyTokenizer& tk, const std::vector<std::string>& vars);

inline Polynomial parse_base(detail::PolyTokenizer& tk, const std::vector<std::string>& vars) {
  char c = tk.peek();
  std::size_t start = tk.pos;
  if (c == '(') {
    ++tk.pos;
    Polynomial inner = parse_expr(tk, vars);
    if (!tk.consume(')')) throw ParseError("expected ')'", tk.pos);
    return inner;
  }
  if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
    const char* first = tk.text.data() + tk.pos;
    const char* last = tk.text.data() + tk.text.size();
    double value = 0.0;
    auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{}) throw ParseError("malformed number", start);
    tk.pos += static_cast<std::size_t>(res.ptr - first);
    return Polynomial::constant(value, vars);
  }
  if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
    std::size_t end = tk.pos;
    while (end < tk.text.size() &&
           (std::isalnum(static_cast<unsigned char>(tk.text[end])) || tk.text[end] == '_'))
      ++end;
    std::string name = tk.text.substr(tk.pos, end - tk.pos);
    for (std::size_t k = 0; k < vars.size(); ++k) {
      if (vars[k] == name) {
        tk.pos = end;
        return Polynomial::variable(static_cast<int>(k), vars);
      }
    }
    throw ParseError("unknown variable '" + name + "'", start);
  }
  throw ParseError("unexpected character", start);
}

inline Polynomial parse_factor(detail::PolyTokenizer& tk, const std::vector<std::string>& vars) {
  int sign = 1;
  while (true) {
    char c = tk.peek();
    if (c == '-') {
      sign = -sign;
      ++tk.pos;
    } else if (c == '+') {
      ++tk.pos;
    } else {
      break;
    }
  }
  Polynomial base = parse_base(tk, vars);
  while (tk.peek() == '^') {
    ++tk.pos;
    std::size_t start = tk.pos;
    tk.skip_ws();
    if (tk.peek() == '-') throw ParseError("negative exponent not allowed in a polynomial", tk.pos);
    const char* first = tk.text.data() + tk.pos;
    const char* last = tk.text.data() + tk.text.size();
    int expn = 0;
    auto res = std::from_chars(first, last, expn);
    if (res.ec != std::errc{}) throw ParseError("exponent must be an integer", start);
    if (res.ptr != last && *res.ptr == '.')
      throw ParseError("exponent must be an integer", start);
    tk.pos += static_cast<std::size_t>(res.ptr - first);
    base = base.pow(expn);
  }
  return sign < 0 ? -base : base;
}

inline Polynomial parse_term(detail::PolyTokenizer& tk, const std::vector<std::string>& vars) {
  Polynomial acc = parse_factor(tk, vars);
  while (true) {
    char c = tk.peek();
    if (c == '*') {
      ++tk.pos;
      acc = acc * parse_factor(tk, vars);
    } else if (c == '/') {
      std::size_t at = tk.pos;
      ++tk.pos;
      Polynomial divisor = parse_factor(tk, vars);
      double value = 0.0;
      if (!divisor.is_constant(&value))
        throw ParseError("polynomial division only by constants", at);
      if (value == 0.0) throw ParseError("division by zero", at);
      acc = (1.0 / value) * acc;
    } else {
      break;
    }
  }
  return acc;
}

inline Polynomial parse_expr(detail::PolyTokenizer& tk, const std::vector<std::string>& vars) {
  Polynomial acc = parse_term(tk, vars);
  while (true) {
    char c = tk.peek();
    if (c == '+') {
      ++tk.pos;
      acc += parse_term(tk, vars);
    } else if (c == '-') {
      ++tk.pos;
      acc -= parse_term(tk, vars);
    } else {
      break;
    }
  }
  return acc;
}

}  // namespace poly_parser

inline Polynomial Polynomial::parse(const std::string& text,
                                    const std::vector<std::string>& vars) {
  detail::PolyTokenizer tk(text);
  Polynomial p = poly_parser::parse_expr(tk, vars);
  tk.skip_ws();
  if (tk.pos != text.size()) throw ParseError("trailing characters after polynomial", tk.pos);
  return p;
}

inline std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  // graded ordering: total degree descending, then exponent vector descending
  std::vector<std::pair<Exponents, double>> items(terms_.begin(), terms_.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    int da = total_degree_of(a.first), db = total_degree_of(b.first);
    if (da != db) return da > db;
    return a.first > b.first;
  });
  std::string out;
  bool first = true;
  for (const auto& [e, c] : items) {
    double mag = std::abs(c);
    if (first) {
      if (c < 0) out += "-";
      first = false;
    } else {
      out += (c < 0) ? " - " : " + ";
    }
    bool any_var = total_degree_of(e) > 0;
    bool unit = (mag == 1.0) && any_var;
    if (!unit) out += detail::format_double(mag);
    bool need_star = !unit;
    for (std::size_t k = 0; k < e.size(); ++k) {
      if (e[k] == 0) continue;
      if (need_star) out += "*";
      out += vars_[k];
      if (e[k] > 1) out += "^" + std::to_string(e[k]);
      need_star = true;
    }
  }
  return out;
}

}  // namespace algpde
