#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "algpde/errors.hpp"

namespace algpde {

// Closed-form scalar expression over named variables. Supported grammar:
// +, -, *, /, ^, parentheses, real literals, pi, sin, cos, sqrt. Anything
// else (other functions, unknown names) is a parse error.
class ScalarExpr {
  enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Sqrt };

  struct Node {
    Op op;
    double value = 0.0;  // Const
    int var = -1;        // Var
    std::shared_ptr<const Node> a, b;
  };

  using NodePtr = std::shared_ptr<const Node>;

 public:
  ScalarExpr() = default;

  static ScalarExpr parse(const std::string& text, const std::vector<std::string>& vars);

  static ScalarExpr constant(double v, std::vector<std::string> vars = {}) {
    ScalarExpr e;
    e.vars_ = std::move(vars);
    e.root_ = make(Op::Const, v);
    return e;
  }

  bool empty() const { return root_ == nullptr; }
  const std::vector<std::string>& variables() const { return vars_; }

  double evaluate(const double* x) const {
    if (!root_) throw Error("evaluating an empty expression");
    return eval_node(*root_, x);
  }

  double evaluate(const std::vector<double>& x) const { return evaluate(x.data()); }

  double evaluate_named(const std::map<std::string, double>& bindings) const {
    std::vector<double> x(vars_.size());
    for (std::size_t k = 0; k < vars_.size(); ++k) {
      auto it = bindings.find(vars_[k]);
      if (it == bindings.end()) throw Error("unbound variable '" + vars_[k] + "'");
      x[k] = it->second;
    }
    return evaluate(x.data());
  }

  // Exact derivative with respect to the var-th variable. Powers must have
  // constant exponents to be differentiable.
  ScalarExpr derivative(int var) const {
    if (!root_) throw Error("differentiating an empty expression");
    if (var < 0 || static_cast<std::size_t>(var) >= vars_.size())
      throw Error("derivative variable index out of range");
    ScalarExpr e;
    e.vars_ = vars_;
    e.root_ = diff_node(root_, var);
    return e;
  }

 private:
  static NodePtr make(Op op, double v) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->value = v;
    return n;
  }

  static NodePtr make_var(int idx) {
    auto n = std::make_shared<Node>();
    n->op = Op::Var;
    n->var = idx;
    return n;
  }

  static NodePtr make_node(Op op, NodePtr a, NodePtr b = nullptr) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
  }

  static bool is_const(const NodePtr& n, double v) {
    return n->op == Op::Const && n->value == v;
  }

  static NodePtr mk_add(NodePtr a, NodePtr b) {
    if (is_const(a, 0.0)) return b;
    if (is_const(b, 0.0)) return a;
    if (a->op == Op::Const && b->op == Op::Const)
      return make(Op::Const, a->value + b->value);
    return make_node(Op::Add, std::move(a), std::move(b));
  }

  static NodePtr mk_sub(NodePtr a, NodePtr b) {
    if (is_const(b, 0.0)) return a;
    if (a->op == Op::Const && b->op == Op::Const)
      return make(Op::Const, a->value - b->value);
    if (is_const(a, 0.0)) return make_node(Op::Neg, std::move(b));
    return make_node(Op::Sub, std::move(a), std::move(b));
  }

  static NodePtr mk_mul(NodePtr a, NodePtr b) {
    if (is_const(a, 0.0) || is_const(b, 0.0)) return make(Op::Const, 0.0);
    if (is_const(a, 1.0)) return b;
    if (is_const(b, 1.0)) return a;
    if (a->op == Op::Const && b->op == Op::Const)
      return make(Op::Const, a->value * b->value);
    return make_node(Op::Mul, std::move(a), std::move(b));
  }

  static NodePtr mk_div(NodePtr a, NodePtr b) {
    if (is_const(a, 0.0)) return a;
    if (is_const(b, 1.0)) return a;
    return make_node(Op::Div, std::move(a), std::move(b));
  }

  static NodePtr diff_node(const NodePtr& n, int var) {
    switch (n->op) {
      case Op::Const:
        return make(Op::Const, 0.0);
      case Op::Var:
        return make(Op::Const, n->var == var ? 1.0 : 0.0);
      case Op::Add:
        return mk_add(diff_node(n->a, var), diff_node(n->b, var));
      case Op::Sub:
        return mk_sub(diff_node(n->a, var), diff_node(n->b, var));
      case Op::Mul:
        return mk_add(mk_mul(diff_node(n->a, var), n->b),
                      mk_mul(n->a, diff_node(n->b, var)));
      case Op::Div:
        return mk_div(mk_sub(mk_mul(diff_node(n->a, var), n->b),
                             mk_mul(n->a, diff_node(n->b, var))),
                      make_node(Op::Mul, n->b, n->b));
      case Op::Pow: {
        if (n->b->op != Op::Const)
          throw Error("cannot differentiate a power with a non-constant exponent");
        const double e = n->b->value;
        NodePtr reduced = make_node(Op::Pow, n->a, make(Op::Const, e - 1.0));
        if (e == 1.0) return diff_node(n->a, var);
        if (e == 2.0) reduced = n->a;
        return mk_mul(make(Op::Const, e), mk_mul(reduced, diff_node(n->a, var)));
      }
      case Op::Neg:
        return mk_sub(make(Op::Const, 0.0), diff_node(n->a, var));
      case Op::Sin:
        return mk_mul(make_node(Op::Cos, n->a), diff_node(n->a, var));
      case Op::Cos:
        return mk_sub(make(Op::Const, 0.0),
                      mk_mul(make_node(Op::Sin, n->a), diff_node(n->a, var)));
      case Op::Sqrt:
        return mk_div(diff_node(n->a, var),
                      mk_mul(make(Op::Const, 2.0), make_node(Op::Sqrt, n->a)));
    }
    throw Error("corrupt expression node");
  }

  static double eval_node(const Node& n, const double* x) {
    switch (n.op) {
      case Op::Const:
        return n.value;
      case Op::Var:
        return x[n.var];
      case Op::Add:
        return eval_node(*n.a, x) + eval_node(*n.b, x);
      case Op::Sub:
        return eval_node(*n.a, x) - eval_node(*n.b, x);
      case Op::Mul:
        return eval_node(*n.a, x) * eval_node(*n.b, x);
      case Op::Div: {
        double num = eval_node(*n.a, x);
        double den = eval_node(*n.b, x);
        if (den == 0.0) throw NumericalError("division by zero in expression");
        return num / den;
      }
      case Op::Pow: {
        double base = eval_node(*n.a, x);
        double expo = eval_node(*n.b, x);
        double r = std::pow(base, expo);
        if (!std::isfinite(r))
          throw NumericalError("power produced a non-finite value");
        return r;
      }
      case Op::Neg:
        return -eval_node(*n.a, x);
      case Op::Sin:
        return std::sin(eval_node(*n.a, x));
      case Op::Cos:
        return std::cos(eval_node(*n.a, x));
      case Op::Sqrt: {
        double v = eval_node(*n.a, x);
        if (v < 0.0) throw NumericalError("sqrt of a negative value");
        return std::sqrt(v);
      }
    }
    throw Error("corrupt expression node");
  }

  struct Parser {
    const std::string& text;
    const std::vector<std::string>& vars;
    std::size_t pos = 0;

    void skip_ws() {
      while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    char peek() {
      skip_ws();
      return pos < text.size() ? text[pos] : '\0';
    }

    NodePtr expr() {
      NodePtr acc = term();
      while (true) {
        char c = peek();
        if (c == '+') {
          ++pos;
          acc = make_node(Op::Add, acc, term());
        } else if (c == '-') {
          ++pos;
          acc = make_node(Op::Sub, acc, term());
        } else {
          return acc;
        }
      }
    }

    NodePtr term() {
      NodePtr acc = factor();
      while (true) {
        char c = peek();
        if (c == '*') {
          ++pos;
          acc = make_node(Op::Mul, acc, factor());
        } else if (c == '/') {
          ++pos;
          acc = make_node(Op::Div, acc, factor());
        } else {
          return acc;
        }
      }
    }

    NodePtr factor() {
      char c = peek();
      if (c == '-') {
        ++pos;
        return make_node(Op::Neg, factor());
      }
      if (c == '+') {
        ++pos;
        return factor();
      }
      return power();
    }

    // right-associative: a^b^c = a^(b^c)
    NodePtr power() {
      NodePtr base = primary();
      if (peek() == '^') {
        ++pos;
        NodePtr expo = factor();
        return make_node(Op::Pow, base, expo);
      }
      return base;
    }

    NodePtr primary() {
      char c = peek();
      std::size_t start = pos;
      if (c == '(') {
        ++pos;
        NodePtr inner = expr();
        skip_ws();
        if (pos >= text.size() || text[pos] != ')') throw ParseError("expected ')'", pos);
        ++pos;
        return inner;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        const char* first = text.data() + pos;
        const char* last = text.data() + text.size();
        double value = 0.0;
        auto res = std::from_chars(first, last, value);
        if (res.ec != std::errc{}) throw ParseError("malformed number", start);
        pos += static_cast<std::size_t>(res.ptr - first);
        return make(Op::Const, value);
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t end = pos;
        while (end < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[end])) || text[end] == '_'))
          ++end;
        std::string name = text.substr(pos, end - pos);
        pos = end;
        if (peek() == '(') {
          Op fn;
          if (name == "sin")
            fn = Op::Sin;
          else if (name == "cos")
            fn = Op::Cos;
          else if (name == "sqrt")
            fn = Op::Sqrt;
          else
            throw ParseError("unknown function '" + name + "'", start);
          ++pos;  // '('
          NodePtr arg = expr();
          skip_ws();
          if (pos >= text.size() || text[pos] != ')') throw ParseError("expected ')'", pos);
          ++pos;
          return make_node(fn, arg);
        }
        if (name == "pi") return make(Op::Const, 3.14159265358979323846);
        for (std::size_t k = 0; k < vars.size(); ++k)
          if (vars[k] == name) return make_var(static_cast<int>(k));
        throw ParseError("unknown variable '" + name + "'", start);
      }
      throw ParseError("unexpected character", start);
    }
  };

  std::vector<std::string> vars_;
  NodePtr root_;
};

inline ScalarExpr ScalarExpr::parse(const std::string& text,
                                    const std::vector<std::string>& vars) {
  ScalarExpr e;
  e.vars_ = vars;
  Parser p{text, vars};
  e.root_ = p.expr();
  p.skip_ws();
  if (p.pos != text.size()) throw ParseError("trailing characters after expression", p.pos);
  return e;
}

}  // namespace algpde
