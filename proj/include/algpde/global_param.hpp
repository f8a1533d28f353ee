#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "algpde/errors.hpp"
#include "algpde/linear_system.hpp"
#include "algpde/scalar_expr.hpp"
#include "algpde/stencil.hpp"

namespace algpde {

// Smooth closed curve given by a periodic parametrization t -> (x(t), y(t)).
// Derivatives of the parametrization are formed symbolically, so the induced
// metric g = |X'|^2 and its rate g' = 2 X'.X'' are exact up to rounding.
class GlobalParam {
 public:
  GlobalParam(const ScalarExpr& x, const ScalarExpr& y, double period)
      : x_(x),
        y_(y),
        dx_(x.derivative(0)),
        dy_(y.derivative(0)),
        ddx_(dx_.derivative(0)),
        ddy_(dy_.derivative(0)),
        period_(period) {
    if (!(period > 0.0)) throw Error("parametrization period must be positive");
  }

  double period() const { return period_; }

  Eigen::Vector2d position(double t) const {
    return {x_.evaluate(&t), y_.evaluate(&t)};
  }
  Eigen::Vector2d velocity(double t) const {
    return {dx_.evaluate(&t), dy_.evaluate(&t)};
  }
  Eigen::Vector2d acceleration(double t) const {
    return {ddx_.evaluate(&t), ddy_.evaluate(&t)};
  }

  double metric(double t) const { return velocity(t).squaredNorm(); }
  double metric_rate(double t) const {
    return 2.0 * velocity(t).dot(acceleration(t));
  }

 private:
  ScalarExpr x_, y_, dx_, dy_, ddx_, ddy_;
  double period_;
};

struct GlobalSolution {
  std::vector<double> t;
  std::vector<Eigen::Vector2d> points;
  std::vector<double> u;
};

// Solve -Laplace(u) + c u = f along the curve using N uniformly spaced
// parameter nodes.  In the parameter coordinate the operator reads
//   -(1/g) u'' + (g'/(2 g^2)) u' + c u = f,
// discretized with centered 3- or 5-point differences; the resulting cyclic
// system is solved directly.
inline GlobalSolution solve_on_parametrized_curve(
    const GlobalParam& P, const std::function<double(const Eigen::Vector2d&)>& c,
    const std::function<double(const Eigen::Vector2d&)>& f, int N,
    int stencil_points = 3, double tol = 1e-12) {
  if (stencil_points != 3 && stencil_points != 5)
    throw ConfigError("stencil width must be 3 or 5");
  if (N <= stencil_points)
    throw ConfigError("too few nodes for the requested stencil");

  const double dt = P.period() / N;
  const int half = stencil_points / 2;
  std::vector<double> offsets;
  for (int k = -half; k <= half; ++k) offsets.push_back(k * dt);
  const std::vector<double> w1 = derivative_weights(offsets, 1);
  const std::vector<double> w2 = derivative_weights(offsets, 2);

  GlobalSolution out;
  out.t.resize(N);
  out.points.resize(N);
  LinearSystem sys(N);
  for (int i = 0; i < N; ++i) {
    const double t = i * dt;
    out.t[i] = t;
    out.points[i] = P.position(t);
    const double g = P.metric(t);
    if (!(g > 1e-14))
      throw NumericalError("parametrization is degenerate (zero speed)");
    const double gp = P.metric_rate(t);
    for (int j = 0; j < stencil_points; ++j) {
      const int col = (i + j - half + N) % N;
      sys.add(i, col, -w2[j] / g + gp / (2.0 * g * g) * w1[j]);
    }
    sys.add(i, i, c(out.points[i]));
    sys.set_rhs(i, f(out.points[i]));
  }
  out.u = sys.solve(tol);
  return out;
}

}  // namespace algpde
