#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

// Shared oracles for the test suites. Everything here is deliberately
// independent of the library internals it is used to check.
namespace testutil {

// Central-difference derivative, step tuned for O(1) arguments.
inline double fd_derivative(const std::function<double(double)>& f, double x,
                            double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double fd_partial(const std::function<double(std::vector<double>)>& f,
                         std::vector<double> x, std::size_t k, double h = 1e-5) {
  std::vector<double> xp = x, xm = x;
  xp[k] += h;
  xm[k] -= h;
  return (f(xp) - f(xm)) / (2.0 * h);
}

// Adaptive Simpson quadrature; tol is an absolute error target.
inline double simpson_rec(const std::function<double(double)>& f, double a, double b,
                          double fa, double fm, double fb, double whole, double tol,
                          int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12) {
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

// Deterministic RNG for property-style tests.
inline std::mt19937& rng() {
  static std::mt19937 gen(0x5eed1234u);
  return gen;
}

inline double uniform(double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(rng());
}

}  // namespace testutil
