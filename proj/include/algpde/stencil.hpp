#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "algpde/errors.hpp"

namespace algpde {

// Weights w such that sum_j w_j u(x0 + offsets[j]) approximates the
// derivative of given order of u at x0, exact for polynomials of degree
// < offsets.size().  Offsets need not be uniform or symmetric.
inline std::vector<double> derivative_weights(const std::vector<double>& offsets,
                                              int order) {
  const std::size_t n = offsets.size();
  if (order < 0) throw Error("derivative order must be nonnegative");
  if (n == 0 || static_cast<std::size_t>(order) >= n)
    throw Error("need at least order+1 stencil offsets");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (offsets[i] == offsets[j])
        throw NumericalError("duplicate stencil offsets");

  double scale = 0.0;
  for (double a : offsets) scale = std::max(scale, std::abs(a));
  if (scale == 0.0) scale = 1.0;

  Eigen::MatrixXd V(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double a = offsets[j] / scale;
    double p = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      V(k, j) = p;
      p *= a;
    }
  }
  double fact = 1.0;
  for (int k = 2; k <= order; ++k) fact *= k;
  rhs(order) = fact;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(V);
  if (!lu.isInvertible())
    throw NumericalError("stencil moment system is singular");
  Eigen::VectorXd w = lu.solve(rhs);

  double denom = std::pow(scale, order);
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = w(j) / denom;
  return out;
}

// Weights approximating the Laplacian at the first point from samples at all
// the points (local 2D coordinates).  A weighted least-squares quadratic is
// fitted, with weights decaying in distance from the center; the returned row
// is validated to reproduce the Laplacian of every quadratic monomial.
inline std::vector<double> laplacian_weights_2d(
    const std::vector<std::array<double, 2>>& pts) {
  const std::size_t m = pts.size();
  if (m < 5) throw Error("need at least 5 points for a Laplacian fit");

  double scale = 0.0;
  for (const auto& p : pts)
    scale = std::max({scale, std::abs(p[0]), std::abs(p[1])});
  if (scale == 0.0) throw NumericalError("all fit points coincide");

  std::vector<double> dist;
  dist.reserve(m - 1);
  for (std::size_t i = 1; i < m; ++i) {
    const double t1 = (pts[i][0] - pts[0][0]) / scale;
    const double t2 = (pts[i][1] - pts[0][1]) / scale;
    dist.push_back(std::hypot(t1, t2));
  }
  std::nth_element(dist.begin(), dist.begin() + dist.size() / 2, dist.end());
  const double med = dist[dist.size() / 2];
  const double eps = std::max(med * med * 1e-2, 1e-300);

  Eigen::MatrixXd B(m, 6);
  Eigen::VectorXd sqw(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double t1 = (pts[i][0] - pts[0][0]) / scale;
    const double t2 = (pts[i][1] - pts[0][1]) / scale;
    sqw(i) = 1.0 / std::sqrt(eps + t1 * t1 + t2 * t2);
    B(i, 0) = sqw(i);
    B(i, 1) = sqw(i) * t1;
    B(i, 2) = sqw(i) * t2;
    B(i, 3) = sqw(i) * t1 * t1;
    B(i, 4) = sqw(i) * t1 * t2;
    B(i, 5) = sqw(i) * t2 * t2;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(B,
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  // row extracting 2*a20 + 2*a02 from the scaled samples
  Eigen::VectorXd pick = Eigen::VectorXd::Zero(6);
  pick(3) = 2.0;
  pick(5) = 2.0;
  Eigen::VectorXd row = svd.solve(Eigen::MatrixXd::Identity(m, m)).transpose() * pick;
  for (std::size_t i = 0; i < m; ++i) row(i) *= sqw(i);

  // the fit must reproduce the Laplacian of each quadratic monomial
  const double lap[6] = {0.0, 0.0, 0.0, 2.0, 0.0, 2.0};
  for (int k = 0; k < 6; ++k) {
    double applied = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double t1 = (pts[i][0] - pts[0][0]) / scale;
      const double t2 = (pts[i][1] - pts[0][1]) / scale;
      const double mono[6] = {1.0, t1, t2, t1 * t1, t1 * t2, t2 * t2};
      applied += row(i) * mono[k];
    }
    if (std::abs(applied - lap[k]) > 1e-7)
      throw NumericalError(
          "point cloud does not determine the Laplacian to second order");
  }

  std::vector<double> out(m);
  const double s2 = scale * scale;
  for (std::size_t i = 0; i < m; ++i) out[i] = row(i) / s2;
  return out;
}

}  // namespace algpde
