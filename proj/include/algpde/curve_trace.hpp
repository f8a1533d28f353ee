#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "algpde/errors.hpp"
#include "algpde/polynomial.hpp"
#include "algpde/singularity.hpp"

namespace algpde {

// Implicit plane curve F = 0 with cached derivative polynomials.
class ImplicitCurve {
 public:
  explicit ImplicitCurve(Polynomial F)
      : F_(std::move(F)),
        Fx_(F_.derivative(0)),
        Fy_(F_.derivative(1)),
        Fxx_(Fx_.derivative(0)),
        Fxy_(Fx_.derivative(1)),
        Fyy_(Fy_.derivative(1)) {
    if (F_.nvars() != 2) throw Error("implicit curve needs two variables");
    for (const auto& [e, c] : F_.terms()) coeff_scale_ += std::abs(c);
    if (coeff_scale_ == 0.0) throw Error("implicit curve from zero polynomial");
  }

  const Polynomial& polynomial() const { return F_; }

  double f(const Eigen::Vector2d& p) const {
    const double xy[2] = {p.x(), p.y()};
    return F_.evaluate(xy);
  }

  Eigen::Vector2d grad(const Eigen::Vector2d& p) const {
    const double xy[2] = {p.x(), p.y()};
    return {Fx_.evaluate(xy), Fy_.evaluate(xy)};
  }

  // unit tangent; the sign convention follows the rotated gradient
  Eigen::Vector2d tangent(const Eigen::Vector2d& p) const {
    Eigen::Vector2d g = grad(p);
    const double n = g.norm();
    if (n < 1e-300) throw NumericalError("tangent requested at a singular point");
    return {-g.y() / n, g.x() / n};
  }

  Eigen::Matrix2d hess(const Eigen::Vector2d& p) const {
    const double xy[2] = {p.x(), p.y()};
    const double mixed = Fxy_.evaluate(xy);
    Eigen::Matrix2d H;
    H << Fxx_.evaluate(xy), mixed, mixed, Fyy_.evaluate(xy);
    return H;
  }

  double curvature(const Eigen::Vector2d& p) const {
    const double xy[2] = {p.x(), p.y()};
    const double fx = Fx_.evaluate(xy), fy = Fy_.evaluate(xy);
    const double fxx = Fxx_.evaluate(xy), fxy = Fxy_.evaluate(xy),
                 fyy = Fyy_.evaluate(xy);
    const double g2 = fx * fx + fy * fy;
    if (g2 < 1e-300) return std::numeric_limits<double>::infinity();
    return std::abs(fxx * fy * fy - 2.0 * fxy * fx * fy + fyy * fx * fx) /
           std::pow(g2, 1.5);
  }

  double value_scale(const Eigen::Vector2d& p) const {
    return coeff_scale_ *
           std::pow(std::max(1.0, p.lpNorm<Eigen::Infinity>()), F_.total_degree());
  }

  // Gauss-Newton projection onto the zero set
  Eigen::Vector2d project(Eigen::Vector2d p, double rel_tol = 1e-14) const {
    for (int it = 0; it < 100; ++it) {
      const double v = f(p);
      if (std::abs(v) <= rel_tol * value_scale(p)) return p;
      const Eigen::Vector2d g = grad(p);
      const double g2 = g.squaredNorm();
      if (g2 < 1e-300)
        throw NumericalError("projection hit a critical point of the curve");
      p -= (v / g2) * g;
    }
    if (std::abs(f(p)) <= 1e4 * rel_tol * value_scale(p)) return p;
    throw NumericalError("projection onto the curve did not converge");
  }

 private:
  Polynomial F_, Fx_, Fy_, Fxx_, Fxy_, Fyy_;
  double coeff_scale_ = 0.0;
};

// cubic Hermite interpolation between points with unit tangents
inline Eigen::Vector2d hermite_point(const Eigen::Vector2d& p0,
                                     const Eigen::Vector2d& t0,
                                     const Eigen::Vector2d& p1,
                                     const Eigen::Vector2d& t1, double xi) {
  const double c = (p1 - p0).norm();
  const double x2 = xi * xi, x3 = x2 * xi;
  return (2 * x3 - 3 * x2 + 1) * p0 + (x3 - 2 * x2 + xi) * c * t0 +
         (-2 * x3 + 3 * x2) * p1 + (x3 - x2) * c * t1;
}

inline double hermite_arc(const Eigen::Vector2d& p0, const Eigen::Vector2d& t0,
                          const Eigen::Vector2d& p1, const Eigen::Vector2d& t1) {
  static const double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                               0.5384693101056831, 0.9061798459386640};
  static const double gw[5] = {0.2369268850561891, 0.4786286704993665,
                               0.5688888888888889, 0.4786286704993665,
                               0.2369268850561891};
  const double c = (p1 - p0).norm();
  double acc = 0.0;
  for (int k = 0; k < 5; ++k) {
    const double xi = 0.5 + 0.5 * gx[k];
    const double x2 = xi * xi;
    const Eigen::Vector2d d = (6 * x2 - 6 * xi) * p0 +
                              (3 * x2 - 4 * xi + 1) * c * t0 +
                              (-6 * x2 + 6 * xi) * p1 + (3 * x2 - 2 * xi) * c * t1;
    acc += gw[k] * d.norm();
  }
  return 0.5 * acc;
}

struct SingularPassageSpec {
  enum class Kind { Crossing, Series };
  Eigen::Vector2d location;
  Kind kind = Kind::Crossing;
  std::vector<Eigen::Vector2d> tangents;     // Crossing: unit branch tangents
  std::shared_ptr<const SeriesChart> chart;  // Series
};

struct TracePoint {
  Eigen::Vector2d p;
  Eigen::Vector2d tangent;
  int passage = -1;   // index into the passage spec list when this is one
  int chart_id = -1;  // passage spec whose chart generated this point
  double chart_s = 0.0;
};

struct TraceResult {
  std::vector<TracePoint> pts;  // cyclic
  std::vector<double> arc;      // cumulative, arc[0] = 0
  double length = 0.0;
  std::vector<int> passage_indices;  // positions in pts, traversal order

  // arclength of the cyclic interval i -> i+1
  double gap(std::size_t i) const {
    const std::size_t j = (i + 1) % pts.size();
    const double a = j == 0 ? length : arc[j];
    return a - arc[i];
  }
};

struct TraceOptions {
  double max_step = 0.0;         // required: target spatial density
  double min_step = 0.0;         // default max_step * 1e-4
  double theta_budget = 0.3;     // max turning angle per step
  double singular_radius = 0.0;  // default 6 * max_step
  std::size_t max_points = 2000000;
};

namespace detail {

inline double signed_root(double v, int m) {
  if (m % 2 == 1) return std::copysign(std::pow(std::abs(v), 1.0 / m), v);
  if (v < 0.0) throw NumericalError("even chart power with a negative offset");
  return std::pow(v, 1.0 / m);
}

// 1D Newton along the chart's solved coordinate with the power coordinate
// held fixed; starts from the chart prediction
inline Eigen::Vector2d polish_on_line(const ImplicitCurve& C,
                                      const SeriesChart& chart, double s) {
  Eigen::Vector2d p = chart.position(s);
  const int sv = 1 - chart.power_var();
  const Polynomial dF = C.polynomial().derivative(sv);
  for (int it = 0; it < 60; ++it) {
    const double v = C.f(p);
    if (std::abs(v) <= 1e-14 * C.value_scale(p)) return p;
    const double xy[2] = {p.x(), p.y()};
    const double d = dF.evaluate(xy);
    if (d == 0.0) break;
    p[sv] -= v / d;
  }
  if (std::abs(C.f(p)) <= 1e-10 * C.value_scale(p)) return p;
  throw NumericalError("chart polish did not converge");
}

}  // namespace detail

// Marches the closed curve from the seed using curvature-adaptive
// predictor-corrector steps.  Declared singular points are crossed in a
// dedicated mode: transversal crossings by 1D Newton solves in the normal
// offset along the branch tangent, cusp-type points by sampling the series
// chart; the singular point itself is inserted exactly.
inline TraceResult trace_closed_curve(
    const Polynomial& F, const Eigen::Vector2d& seed,
    const std::vector<SingularPassageSpec>& passages, const TraceOptions& opt) {
  if (!(opt.max_step > 0.0)) throw ConfigError("trace needs a positive max_step");
  const double min_step = opt.min_step > 0.0 ? opt.min_step : opt.max_step * 1e-4;
  const double r_sing =
      opt.singular_radius > 0.0 ? opt.singular_radius : 6.0 * opt.max_step;

  ImplicitCurve C(F);
  TraceResult out;

  Eigen::Vector2d p = C.project(seed);
  for (const auto& ps : passages)
    if ((p - ps.location).norm() < 2.0 * r_sing)
      throw ConfigError("trace seed too close to a singular point");
  Eigen::Vector2d t = C.tangent(p);
  out.pts.push_back({p, t, -1, -1, 0.0});

  auto push_point = [&](const TracePoint& tp) {
    if (out.pts.size() >= opt.max_points)
      throw NumericalError("trace did not close (point budget exhausted)");
    if (tp.passage >= 0)
      out.passage_indices.push_back(static_cast<int>(out.pts.size()));
    out.pts.push_back(tp);
  };

  bool closed = false;
  while (!closed) {
    // singular approach?
    int hit = -1;
    for (std::size_t k = 0; k < passages.size(); ++k) {
      const Eigen::Vector2d d = passages[k].location - p;
      if (d.norm() < r_sing && t.dot(d) > 0.0) {
        hit = static_cast<int>(k);
        break;
      }
    }

    if (hit >= 0) {
      const SingularPassageSpec& ps = passages[hit];
      if (ps.kind == SingularPassageSpec::Kind::Crossing) {
        // branch tangent best aligned with the travel direction
        if (ps.tangents.empty())
          throw ConfigError("crossing passage without branch tangents");
        Eigen::Vector2d v = ps.tangents[0];
        for (const auto& cand : ps.tangents)
          if (std::abs(t.dot(cand)) > std::abs(t.dot(v))) v = cand;
        if (t.dot(v) < 0.0) v = -v;
        const Eigen::Vector2d n(-v.y(), v.x());

        const double xi0 = (p - ps.location).dot(v);
        if (xi0 >= 0.0)
          throw NumericalError("trace approached a crossing from the far side");
        const int K = std::max(4, static_cast<int>(std::ceil(-xi0 / opt.max_step)));
        const double dxi = -xi0 / K;
        double w = (p - ps.location).dot(n);
        // 1D Newton in the normal offset w along q = loc + xi v + w n
        auto solve_w = [&](double xi, double w_start) {
          double wv = w_start;
          for (int it = 0; it < 80; ++it) {
            const Eigen::Vector2d q = ps.location + xi * v + wv * n;
            const double val = C.f(q);
            if (std::abs(val) <= 1e-14 * C.value_scale(q)) return wv;
            const double der = C.grad(q).dot(n);
            if (der == 0.0) throw NumericalError("crossing solve stalled");
            wv -= val / der;
          }
          const Eigen::Vector2d q = ps.location + xi * v + wv * n;
          if (std::abs(C.f(q)) <= 1e-10 * C.value_scale(q)) return wv;
          throw NumericalError("crossing solve did not converge");
        };

        for (int k = 1; k < K; ++k) {
          const double xi = xi0 + k * dxi;
          w = solve_w(xi, w);
          const Eigen::Vector2d q = ps.location + xi * v + w * n;
          Eigen::Vector2d tq = C.tangent(q);
          if (tq.dot(v) < 0.0) tq = -tq;
          push_point({q, tq, -1, -1, 0.0});
        }
        push_point({ps.location, v, hit, -1, 0.0});
        w = 0.0;
        for (int k = 1; k <= K; ++k) {
          const double xi = k * dxi;
          w = solve_w(xi, w);
          const Eigen::Vector2d q = ps.location + xi * v + w * n;
          Eigen::Vector2d tq = C.tangent(q);
          if (tq.dot(v) < 0.0) tq = -tq;
          push_point({q, tq, -1, -1, 0.0});
        }
        p = out.pts.back().p;
        t = out.pts.back().tangent;
      } else {
        if (!ps.chart) throw ConfigError("series passage without a chart");
        const SeriesChart& chart = *ps.chart;
        const int m = chart.power();
        if (m % 2 == 0)
          throw ConfigError("series passage needs an odd chart power");
        const double delta = (p - ps.location)[chart.power_var()];
        const double s_now = detail::signed_root(delta, m);
        if (std::abs(s_now) > 0.95 * chart.valid_radius())
          throw NumericalError("singular approach outside the chart radius");
        const double a_now = std::abs(chart.arc_from_center(s_now));
        const int K =
            std::max(4, static_cast<int>(std::ceil(a_now / opt.max_step)));
        const double ds = std::abs(s_now) / K;
        const double dir = s_now > 0 ? -1.0 : 1.0;  // marching toward s = 0

        auto chart_point = [&](double s) {
          const Eigen::Vector2d q = detail::polish_on_line(C, chart, s);
          Eigen::Vector2d tq = chart.velocity(s);
          tq.normalize();
          if (dir < 0) tq = -tq;  // traversal has s decreasing
          return TracePoint{q, tq, -1, hit, s};
        };

        for (int k = K - 1; k >= 1; --k)
          push_point(chart_point(-dir * k * ds));
        {
          // outgoing limit direction of the branch at the cusp itself
          Eigen::Vector2d tc = chart.velocity(dir * 1e-12);
          tc.normalize();
          if (dir < 0) tc = -tc;
          push_point({ps.location, tc, hit, hit, 0.0});
        }
        for (int k = 1; k <= K; ++k) push_point(chart_point(dir * k * ds));
        p = out.pts.back().p;
        t = out.pts.back().tangent;
      }
      continue;
    }

    const double kappa = C.curvature(p);
    double step = std::clamp(opt.theta_budget / std::max(kappa, 1e-12), min_step,
                             opt.max_step);

    Eigen::Vector2d q, tq;
    while (true) {
      q = C.project(p + step * t);
      tq = C.tangent(q);
      if (tq.dot(t) < 0.0) tq = -tq;
      if (tq.dot(t) > 0.5 || step <= min_step * 1.0001) break;
      step *= 0.5;  // overly sharp turn; retry shorter
    }

    // closure: back at the start moving the same way
    if (out.pts.size() > 20 && (q - out.pts[0].p).norm() < 1.2 * step &&
        tq.dot(out.pts[0].tangent) > 0.5) {
      closed = true;
      break;
    }
    push_point({q, tq, -1, -1, 0.0});
    p = q;
    t = tq;
  }

  // cumulative arclength; chart-covered intervals use the exact chart arc
  const std::size_t n = out.pts.size();
  out.arc.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const TracePoint& a = out.pts[i];
    const TracePoint& b = out.pts[(i + 1) % n];
    double seg;
    if (a.chart_id >= 0 && a.chart_id == b.chart_id) {
      const SeriesChart& chart = *passages[a.chart_id].chart;
      seg = std::abs(chart.arc_from_center(b.chart_s) -
                     chart.arc_from_center(a.chart_s));
    } else {
      seg = hermite_arc(a.p, a.tangent, b.p, b.tangent);
    }
    if (i + 1 < n)
      out.arc[i + 1] = out.arc[i] + seg;
    else
      out.length = out.arc[i] + seg;
  }
  return out;
}

}  // namespace algpde
