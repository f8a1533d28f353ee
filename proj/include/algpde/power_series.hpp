#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "algpde/errors.hpp"

namespace algpde {

// Truncated real power series in one variable; coefficient k multiplies s^k.
// All operations truncate to the shorter operand's order.
class PowerSeries {
 public:
  explicit PowerSeries(int order) : c_(check_order(order), 0.0) {}

  static PowerSeries monomial(int order, int k, double coeff = 1.0) {
    PowerSeries p(order);
    if (k >= 0 && k < order) p.c_[k] = coeff;
    return p;
  }

  int order() const { return static_cast<int>(c_.size()); }

  double coeff(int k) const {
    return (k >= 0 && k < order()) ? c_[k] : 0.0;
  }
  void set_coeff(int k, double v) {
    if (k < 0 || k >= order()) throw Error("series coefficient out of range");
    c_[k] = v;
  }

  double max_abs_coeff() const {
    double m = 0.0;
    for (double v : c_) m = std::max(m, std::abs(v));
    return m;
  }

  // index of the first coefficient exceeding tol in magnitude (order() if none)
  int valuation(double tol = 0.0) const {
    for (int k = 0; k < order(); ++k)
      if (std::abs(c_[k]) > tol) return k;
    return order();
  }

  PowerSeries truncated(int new_order) const {
    PowerSeries p(new_order);
    for (int k = 0; k < std::min(new_order, order()); ++k) p.c_[k] = c_[k];
    return p;
  }

  PowerSeries operator+(const PowerSeries& o) const {
    PowerSeries p(std::min(order(), o.order()));
    for (int k = 0; k < p.order(); ++k) p.c_[k] = coeff(k) + o.coeff(k);
    return p;
  }

  PowerSeries operator-(const PowerSeries& o) const {
    PowerSeries p(std::min(order(), o.order()));
    for (int k = 0; k < p.order(); ++k) p.c_[k] = coeff(k) - o.coeff(k);
    return p;
  }

  PowerSeries operator*(const PowerSeries& o) const {
    PowerSeries p(std::min(order(), o.order()));
    for (int i = 0; i < std::min(order(), p.order()); ++i) {
      if (c_[i] == 0.0) continue;
      for (int j = 0; i + j < p.order() && j < o.order(); ++j)
        p.c_[i + j] += c_[i] * o.c_[j];
    }
    return p;
  }

  PowerSeries operator*(double a) const {
    PowerSeries p = *this;
    for (double& v : p.c_) v *= a;
    return p;
  }

  PowerSeries pow(int e) const {
    if (e < 0) throw Error("negative series power");
    PowerSeries acc = monomial(order(), 0);
    PowerSeries base = *this;
    while (e > 0) {
      if (e & 1) acc = acc * base;
      base = base * base;
      e >>= 1;
    }
    return acc;
  }

  // multiply by s^k
  PowerSeries shifted_up(int k) const {
    PowerSeries p(order());
    for (int i = 0; i + k < order(); ++i) p.c_[i + k] = c_[i];
    return p;
  }

  // divide by s^k; the low-order coefficients must be negligible
  PowerSeries shifted_down(int k, double tol = 0.0) const {
    for (int i = 0; i < std::min(k, order()); ++i)
      if (std::abs(c_[i]) > tol)
        throw NumericalError("series division leaves a pole");
    PowerSeries p(order());
    for (int i = k; i < order(); ++i) p.c_[i - k] = c_[i];
    return p;
  }

  PowerSeries derivative() const {
    PowerSeries p(order());
    for (int k = 1; k < order(); ++k) p.c_[k - 1] = k * c_[k];
    return p;
  }

  double evaluate(double s) const {
    double acc = 0.0;
    for (int k = order() - 1; k >= 0; --k) acc = acc * s + c_[k];
    return acc;
  }

  // quotient of two series; the divisor's leading coefficient must dominate
  // its own rounding noise, and the dividend must vanish at least as fast
  static PowerSeries divide(const PowerSeries& num, const PowerSeries& den) {
    const double dscale = den.max_abs_coeff();
    if (dscale == 0.0) throw NumericalError("series division by zero");
    const int v = den.valuation(dscale * 1e-13);
    if (v == den.order()) throw NumericalError("series division by zero");
    const double nscale = num.max_abs_coeff();
    PowerSeries n = num.shifted_down(v, nscale * 1e-11);
    PowerSeries d = den.shifted_down(v, dscale * 1e-13);
    const int ord = std::min(n.order(), d.order());
    PowerSeries q(ord);
    for (int k = 0; k < ord; ++k) {
      double s = n.coeff(k);
      for (int j = 0; j < k; ++j) s -= q.c_[j] * d.coeff(k - j);
      q.c_[k] = s / d.c_[0];
    }
    return q;
  }

 private:
  static int check_order(int order) {
    if (order <= 0) throw Error("series order must be positive");
    return order;
  }

  std::vector<double> c_;
};

inline PowerSeries operator*(double a, const PowerSeries& p) { return p * a; }

}  // namespace algpde
