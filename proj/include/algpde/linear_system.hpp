#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <vector>

#include "algpde/errors.hpp"

namespace algpde {

// Square sparse linear system assembled row by row.  solve() dispatches to a
// cyclic Thomas algorithm when every row couples only its cyclic neighbours,
// and to a sparse LU factorization otherwise; either way the result is
// checked against a residual bound before being returned.
class LinearSystem {
 public:
  explicit LinearSystem(int n) : n_(n), rows_(n), rhs_(n, 0.0) {
    if (n <= 0) throw Error("linear system must have positive size");
  }

  int size() const { return n_; }

  void add(int row, int col, double value) {
    check_index(row);
    check_index(col);
    rows_[row][col] += value;
  }

  void set_rhs(int row, double value) {
    check_index(row);
    rhs_[row] = value;
  }

  double rhs(int row) const {
    check_index(row);
    return rhs_[row];
  }

  std::vector<double> solve(double tol = 1e-12) const {
    std::vector<double> x;
    if (is_cyclic_tridiagonal() && solve_cyclic(x) && residual_ok(x, tol))
      return x;
    solve_sparse_lu(x);
    if (!residual_ok(x, tol))
      throw NumericalError("linear solve failed the residual check");
    return x;
  }

  double residual_inf(const std::vector<double>& x) const {
    double r = 0.0;
    for (int i = 0; i < n_; ++i) {
      double s = -rhs_[i];
      for (const auto& [j, v] : rows_[i]) s += v * x[j];
      r = std::max(r, std::abs(s));
    }
    return r;
  }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (const auto& [j, v] : rows_[i]) A(i, j) = v;
    return A;
  }

 private:
  void check_index(int i) const {
    if (i < 0 || i >= n_) throw Error("linear system index out of range");
  }

  // normwise backward error: |r|_inf <= tol (|A|_inf |x|_inf + |b|_inf)
  bool residual_ok(const std::vector<double>& x, double tol) const {
    if (static_cast<int>(x.size()) != n_) return false;
    for (double v : x)
      if (!std::isfinite(v)) return false;
    double bnorm = 0.0;
    for (double b : rhs_) bnorm = std::max(bnorm, std::abs(b));
    double anorm = 0.0;
    for (int i = 0; i < n_; ++i) {
      double s = 0.0;
      for (const auto& [j, v] : rows_[i]) s += std::abs(v);
      anorm = std::max(anorm, s);
    }
    double xnorm = 0.0;
    for (double v : x) xnorm = std::max(xnorm, std::abs(v));
    return residual_inf(x) <= tol * std::max(1.0, anorm * xnorm + bnorm);
  }

  bool is_cyclic_tridiagonal() const {
    if (n_ < 4) return false;
    for (int i = 0; i < n_; ++i) {
      const int prev = (i + n_ - 1) % n_;
      const int next = (i + 1) % n_;
      for (const auto& [j, v] : rows_[i])
        if (j != i && j != prev && j != next) return false;
    }
    return true;
  }

  double coeff(int i, int j) const {
    auto it = rows_[i].find(j);
    return it == rows_[i].end() ? 0.0 : it->second;
  }

  // Thomas elimination for a tridiagonal system; returns false on a zero pivot.
  static bool thomas(const std::vector<double>& a, std::vector<double> b,
                     const std::vector<double>& c, std::vector<double> d,
                     std::vector<double>& x) {
    const int n = static_cast<int>(b.size());
    for (int i = 1; i < n; ++i) {
      if (b[i - 1] == 0.0) return false;
      const double m = a[i] / b[i - 1];
      b[i] -= m * c[i - 1];
      d[i] -= m * d[i - 1];
    }
    if (b[n - 1] == 0.0) return false;
    x.assign(n, 0.0);
    x[n - 1] = d[n - 1] / b[n - 1];
    for (int i = n - 2; i >= 0; --i) x[i] = (d[i] - c[i] * x[i + 1]) / b[i];
    return true;
  }

  // Cyclic tridiagonal solve via the Sherman-Morrison rank-one update.
  bool solve_cyclic(std::vector<double>& x) const {
    std::vector<double> a(n_), b(n_), c(n_);
    for (int i = 0; i < n_; ++i) {
      a[i] = coeff(i, (i + n_ - 1) % n_);
      b[i] = coeff(i, i);
      c[i] = coeff(i, (i + 1) % n_);
    }
    const double alpha = a[0];      // wraps to column n-1
    const double beta = c[n_ - 1];  // wraps to column 0
    if (b[0] == 0.0) return false;
    const double gamma = -b[0];

    std::vector<double> bm = b;
    bm[0] -= gamma;
    bm[n_ - 1] -= alpha * beta / gamma;
    std::vector<double> u(n_, 0.0);
    u[0] = gamma;
    u[n_ - 1] = beta;

    std::vector<double> y, z;
    if (!thomas(a, bm, c, rhs_, y)) return false;
    if (!thomas(a, bm, c, u, z)) return false;

    const double vy = y[0] + alpha / gamma * y[n_ - 1];
    const double vz = z[0] + alpha / gamma * z[n_ - 1];
    if (1.0 + vz == 0.0) return false;
    const double factor = vy / (1.0 + vz);
    x.assign(n_, 0.0);
    for (int i = 0; i < n_; ++i) x[i] = y[i] - factor * z[i];
    for (double v : x)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void solve_sparse_lu(std::vector<double>& x) const {
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < n_; ++i)
      for (const auto& [j, v] : rows_[i]) trips.emplace_back(i, j, v);
    Eigen::SparseMatrix<double> A(n_, n_);
    A.setFromTriplets(trips.begin(), trips.end());
    A.makeCompressed();

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success)
      throw NumericalError("sparse LU factorization failed");

    Eigen::VectorXd b(n_);
    for (int i = 0; i < n_; ++i) b(i) = rhs_[i];
    Eigen::VectorXd sol = lu.solve(b);
    // one step of iterative refinement
    Eigen::VectorXd r = b - A * sol;
    sol += lu.solve(r);

    x.assign(n_, 0.0);
    for (int i = 0; i < n_; ++i) x[i] = sol(i);
  }

  int n_;
  std::vector<std::map<int, double>> rows_;
  std::vector<double> rhs_;
};

}  // namespace algpde
