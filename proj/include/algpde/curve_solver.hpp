#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "algpde/curve_mesh.hpp"
#include "algpde/linear_system.hpp"
#include "algpde/stencil.hpp"

namespace algpde {

using ScalarField = std::function<double(const Eigen::Vector2d&)>;

struct CurveSolveOptions {
  int stencil_points = 3;  // tangential window width at smooth nodes (odd, 3..9)
  double tol = 1e-12;      // linear-solver backward-error acceptance
  // Around every cusp-type passage, rows switch from tangential stencils to
  // ambient-polynomial reconstruction; the switchover arc is this fraction of
  // the chart's arclength footprint, but at least the node-count floor below.
  double singular_window_fraction = 0.4;
  int singular_window_min_nodes = 8;  // reconstruction rows per side, minimum
};

namespace detail {

// Exponent pairs (a, b) of the ambient monomials x^a y^b used for the
// reconstruction rows.  At the cusp node itself the restriction of y behaves
// like the cube root of arclength, whose curve Laplacian diverges, so pure y
// is excluded there; away from the cusp the full degree-lexicographic family
// applies.  Eleven members match the eleven-node reconstruction window.
inline const std::vector<std::pair<int, int>>& cusp_row_basis() {
  static const std::vector<std::pair<int, int>> b = {
      {0, 0}, {1, 0}, {2, 0}, {1, 1}, {0, 2}, {3, 0},
      {2, 1}, {1, 2}, {0, 3}, {4, 0}, {3, 1}};
  return b;
}
inline const std::vector<std::pair<int, int>>& near_row_basis() {
  static const std::vector<std::pair<int, int>> b = {
      {0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2},
      {3, 0}, {2, 1}, {1, 2}, {0, 3}, {4, 0}};
  return b;
}

// (c u - Lap u)(p) for u = x^a y^b restricted to the curve through a regular
// point p, via the implicit representation:
//   Lap u = Lap_ambient u - n^T H_u n - kappa (n . grad u),
// with n = grad F / |grad F| and kappa the signed curvature in that normal.
inline double monomial_row_target(const ImplicitCurve& C, int a, int b,
                                  const Eigen::Vector2d& p, double cval) {
  const Eigen::Vector2d g = C.grad(p);
  const Eigen::Matrix2d H = C.hess(p);
  const double G2 = g.squaredNorm(), G = std::sqrt(G2);
  if (!(G2 > 0.0))
    throw NumericalError("reconstruction target requested at a critical point");
  const double kappa =
      (H(0, 0) * g.y() * g.y() - 2.0 * H(0, 1) * g.x() * g.y() +
       H(1, 1) * g.x() * g.x()) /
      (G2 * G);
  const double X = p.x(), Y = p.y();
  auto mono = [&](int aa, int bb) -> double {
    if (aa < 0 || bb < 0) return 0.0;
    return std::pow(X, aa) * std::pow(Y, bb);
  };
  const double rho = mono(a, b);
  const double rx = a * mono(a - 1, b), ry = b * mono(a, b - 1);
  const double rxx = a * (a - 1) * mono(a - 2, b);
  const double rxy = static_cast<double>(a) * b * mono(a - 1, b - 1);
  const double ryy = b * (b - 1) * mono(a, b - 2);
  const double lap = rxx + ryy;
  const double nHn = (g.x() * g.x() * rxx + 2.0 * g.x() * g.y() * rxy +
                      g.y() * g.y() * ryy) /
                     G2;
  const double ndr = (g.x() * rx + g.y() * ry) / G;
  return cval * rho - (lap - nHn - kappa * ndr);
}

// (c u - Lap u) at the cusp for u = x^a y^b, from the chart series.  With the
// chart metric g(s) = g2 s^2 + g3 s^3 + g4 s^4 + ... and the restriction
// rho(s) = rho0 + rho2 s^2 + rho3 s^3 + rho4 s^4 + ... (no s^1 term), the
// curve Laplacian limit at s = 0 is
//   (8 g2 rho4 + 3/2 g3 rho3 - 2 g4 rho2) / g2^2.
inline double cusp_row_target(const SeriesChart& chart, int a, int b,
                              double cval) {
  const int ord = chart.series().order();
  PowerSeries rho = PowerSeries::monomial(ord, 0);
  if (a > 0) rho = chart.series().pow(a);
  if (b > 0) rho = rho * PowerSeries::monomial(ord, chart.power() * b);
  const double g2 = chart.g2(), g3 = chart.g3(), g4 = chart.g4();
  const double P4 = 8.0 * g2 * rho.coeff(4) + 1.5 * g3 * rho.coeff(3) -
                    2.0 * g4 * rho.coeff(2);
  return cval * rho.coeff(0) - P4 / (g2 * g2);
}

}  // namespace detail

// Solves -Lap u + c u = f on the closed curve discretized by `mesh`, where
// Lap is the curve Laplacian (second arclength derivative).  Each node in the
// cyclic traversal carries one unknown, so a self-intersection point
// automatically gets an independent value for every branch through it.
//
// Row construction:
//  * smooth and crossing nodes: the neighbors are projected onto the node's
//    tangent line; u composed with that coordinate has second derivative
//    exactly equal to Lap u at the node, so plain 1D difference weights in
//    the projected coordinate apply (high-order for wide windows);
//  * nodes within the singular window of a cusp passage: an eleven-node
//    reconstruction row whose weights reproduce (c u - Lap u) exactly for the
//    restrictions of eleven ambient monomials x^a y^b.  Near a cusp that
//    family spans the smooth solutions of the equation far better than any
//    arclength Taylor window, and the weights stay bounded because the
//    moment system is built from the exact node positions.
inline LinearSystem assemble_curve_system(const CurveMesh& mesh,
                                          const ScalarField& c,
                                          const ScalarField& f,
                                          const CurveSolveOptions& opt = {}) {
  const int n = static_cast<int>(mesh.size());
  const int sp = opt.stencil_points;
  if (sp < 3 || sp > 9 || sp % 2 == 0)
    throw ConfigError("tangential window width must be odd and within 3..9");
  if (n <= sp + 1) throw ConfigError("too few nodes for the requested window");
  if (!mesh.curve) throw ConfigError("mesh carries no implicit curve");
  const ImplicitCurve& C = *mesh.curve;

  // mark the reconstruction window of every cusp passage
  constexpr int kWindow = 11;  // reconstruction rows span 11 nodes
  std::vector<const MeshPassage*> owner(n, nullptr);
  for (const MeshPassage& mp : mesh.passages) {
    if (mp.kind != SingularPassageSpec::Kind::Series) continue;
    if (!mp.chart) throw ConfigError("cusp passage without a series chart");
    if (mp.chart->power() != 3)
      throw ConfigError("only cube-root cusp charts are supported");
    const double foot = mp.chart->arc_from_center(mp.chart->valid_radius());
    const int khand =
        std::max(opt.singular_window_min_nodes,
                 static_cast<int>(std::lround(
                     opt.singular_window_fraction * foot / mesh.h)));
    if (2 * khand + 1 + 2 * sp + kWindow > n)
      throw ConfigError("mesh too coarse for the cusp reconstruction window");
    for (int t = -khand; t <= khand; ++t) {
      const int idx = (mp.node + t + n) % n;
      if (owner[idx])
        throw ConfigError("cusp reconstruction windows overlap");
      owner[idx] = &mp;
    }
  }

  LinearSystem sys(n);
  const int half = sp / 2;

  for (int i = 0; i < n; ++i) {
    const CurveNode& nd = mesh.nodes[i];
    sys.set_rhs(i, f(nd.p));

    if (owner[i]) {
      // reconstruction row: weights solve an 11x11 moment system demanding
      // exactness of (c u - Lap u) on the ambient monomial family
      const bool at_cusp = nd.kind == CurveNode::Kind::Cusp;
      const auto& basis =
          at_cusp ? detail::cusp_row_basis() : detail::near_row_basis();
      const double cval = c(nd.p);
      const int lo = i - kWindow / 2;
      Eigen::MatrixXd M(kWindow, kWindow);
      Eigen::VectorXd T(kWindow);
      for (int m = 0; m < kWindow; ++m) {
        const auto [a, b] = basis[m];
        double rowmax = 0.0;
        for (int q = 0; q < kWindow; ++q) {
          const Eigen::Vector2d& pq = mesh.nodes[(lo + q + n) % n].p;
          M(m, q) = std::pow(pq.x(), a) * std::pow(pq.y(), b);
          rowmax = std::max(rowmax, std::abs(M(m, q)));
        }
        const double tgt =
            at_cusp ? detail::cusp_row_target(*owner[i]->chart, a, b, cval)
                    : detail::monomial_row_target(C, a, b, nd.p, cval);
        if (rowmax == 0.0) rowmax = 1.0;
        for (int q = 0; q < kWindow; ++q) M(m, q) /= rowmax;
        T(m) = tgt / rowmax;
      }
      const Eigen::VectorXd w = Eigen::FullPivLU<Eigen::MatrixXd>(M).solve(T);
      for (int q = 0; q < kWindow; ++q)
        sys.add(i, (lo + q + n) % n, w(q));
      continue;
    }

    if (nd.kind == CurveNode::Kind::Cusp)
      throw NumericalError("cusp node outside its reconstruction window");

    // smooth / crossing: 1D difference weights in the tangent projection
    const int lo = i - half;
    std::vector<double> alpha(sp);
    for (int q = 0; q < sp; ++q) {
      const CurveNode& nb = mesh.nodes[(lo + q + n) % n];
      if (nb.kind == CurveNode::Kind::Cusp)
        throw NumericalError("tangential window crosses a cusp node");
      alpha[q] = (nb.p - nd.p).dot(nd.tangent);
    }
    for (int q = 1; q < sp; ++q)
      if (alpha[q] <= alpha[q - 1])
        throw NumericalError("tangential window folds; refine the mesh");
    const std::vector<double> w2 = derivative_weights(alpha, 2);
    for (int q = 0; q < sp; ++q)
      sys.add(i, (lo + q + n) % n, -w2[q]);
    sys.add(i, i, c(nd.p));
  }

  return sys;
}

inline std::vector<double> solve_on_curve_mesh(const CurveMesh& mesh,
                                               const ScalarField& c,
                                               const ScalarField& f,
                                               const CurveSolveOptions& opt = {}) {
  LinearSystem sys = assemble_curve_system(mesh, c, f, opt);
  return sys.solve(opt.tol);
}

}  // namespace algpde
