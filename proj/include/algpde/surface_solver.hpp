#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "algpde/errors.hpp"
#include "algpde/linear_system.hpp"
#include "algpde/surface_mesh.hpp"

namespace algpde {

using ScalarField3 = std::function<double(const Eigen::Vector3d&)>;

// ---------------------------------------------------------------------------
// Weighted least-squares quadratic fit on scattered tangent-plane points.
// coef_map row m gives the coefficient functional a_m = sum_j coef_map(m, j)
// * u_j for the basis {1, t1, t2, t1^2, t1*t2, t2^2}.
// ---------------------------------------------------------------------------
struct Quadratic2DFit {
  Eigen::MatrixXd coef_map;  // 6 x k
  int rank = 0;
  double cond = 0.0;  // of the weighted design matrix, over retained rank
};

namespace detail {

inline Eigen::Matrix<double, 1, 6> quad_basis(const Eigen::Vector2d& t) {
  Eigen::Matrix<double, 1, 6> phi;
  phi << 1.0, t.x(), t.y(), t.x() * t.x(), t.x() * t.y(), t.y() * t.y();
  return phi;
}

// Weighted LS coefficient map for an arbitrary design matrix B (k x m) with
// per-point weights; solves through a complete orthogonal decomposition so
// rank-deficient-but-consistent stencils (e.g. the five-point cross) work.
inline Eigen::MatrixXd ls_coef_map(const Eigen::MatrixXd& B,
                                   const Eigen::VectorXd& sqrtw, int* rank_out,
                                   double* cond_out) {
  const Eigen::MatrixXd WB = sqrtw.asDiagonal() * B;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(WB);
  const int rank = static_cast<int>(cod.rank());
  if (rank_out) *rank_out = rank;
  if (cond_out) {
    const auto& R = cod.matrixQTZ();
    double dmax = 0.0, dmin = 1e300;
    for (int i = 0; i < rank; ++i) {
      dmax = std::max(dmax, std::abs(R(i, i)));
      dmin = std::min(dmin, std::abs(R(i, i)));
    }
    *cond_out = rank == 0 ? 1e300 : dmax / dmin;
  }
  // a = pinv(WB) * W^(1/2) u, so the map from raw values u to coefficients
  return cod.pseudoInverse() * Eigen::MatrixXd(sqrtw.asDiagonal());
}

}  // namespace detail

// Fit weights 1/(eps + |t|^2); eps defaults to 1e-2 * (median |t|)^2.
inline Quadratic2DFit fit_quadratic_2d(
    const std::vector<Eigen::Vector2d>& coords, double eps = -1.0) {
  const int k = static_cast<int>(coords.size());
  if (k < 5)
    throw ConfigError("quadratic fits need at least five stencil points");
  if (eps <= 0.0) {
    std::vector<double> r2;
    r2.reserve(k);
    for (const auto& t : coords)
      if (t.squaredNorm() > 0.0) r2.push_back(t.squaredNorm());
    if (r2.empty()) throw ConfigError("stencil has no off-center points");
    std::nth_element(r2.begin(), r2.begin() + r2.size() / 2, r2.end());
    eps = 1e-2 * r2[r2.size() / 2];
  }
  Eigen::MatrixXd B(k, 6);
  Eigen::VectorXd sqrtw(k);
  for (int j = 0; j < k; ++j) {
    B.row(j) = detail::quad_basis(coords[j]);
    sqrtw(j) = 1.0 / std::sqrt(eps + coords[j].squaredNorm());
  }
  Quadratic2DFit fit;
  fit.coef_map = detail::ls_coef_map(B, sqrtw, &fit.rank, &fit.cond);
  if (fit.cond * fit.cond > 1e12)
    throw NumericalError("degenerate stencil: quadratic fit is ill-conditioned");
  return fit;
}

// ---------------------------------------------------------------------------
// Discrete Laplacian weights: apply a linear functional ell to the fitted
// quadratic coefficients and verify the composed weights reproduce ell on the
// basis itself.  The flat read-off is ell = (0,0,0,2,0,2).
// ---------------------------------------------------------------------------
inline std::vector<double> functional_weights_2d(
    const std::vector<Eigen::Vector2d>& coords,
    const Eigen::Matrix<double, 1, 6>& ell, double eps = -1.0) {
  const Quadratic2DFit fit = fit_quadratic_2d(coords, eps);
  const Eigen::VectorXd w = fit.coef_map.transpose() * ell.transpose();
  // reproduction check: sum_j w_j phi_m(t_j) must equal ell_m for every
  // basis member, else the functional is not recoverable from this stencil
  for (int m = 0; m < 6; ++m) {
    double moment = 0.0, scale = std::abs(ell(m));
    for (int j = 0; j < static_cast<int>(coords.size()); ++j) {
      const double term = w(j) * detail::quad_basis(coords[j])(m);
      moment += term;
      scale += std::abs(term);
    }
    if (std::abs(moment - ell(m)) > 1e-9 * std::max(1.0, scale))
      throw NumericalError(
          "degenerate stencil: weights fail to reproduce the fit basis");
  }
  return std::vector<double>(w.data(), w.data() + w.size());
}

inline std::vector<double> laplacian_weights_2d(
    const std::vector<Eigen::Vector2d>& coords, double eps = -1.0) {
  Eigen::Matrix<double, 1, 6> ell;
  ell << 0.0, 0.0, 0.0, 2.0, 0.0, 2.0;
  return functional_weights_2d(coords, ell, eps);
}

// ---------------------------------------------------------------------------
// Surface assembly
// ---------------------------------------------------------------------------
struct SurfaceSolveOptions {
  double tol = 1e-10;            // relative residual bound for the solve
  double chart_fraction = 0.5;   // chart rows inside this * valid_radius
  double eps_scale = 1e-2;       // fit weight regularization, * spacing^2
  int singular_fit_points = 12;  // stencil size for the singular-node row
};

namespace detail {

// Laplace-Beltrami coefficients in chart coordinates at a fixed point:
// Delta u = sum_ij Ginv_ij d2u/dti dtj + sum_j b_j du/dtj with
// b_j = (1/sqrt g) d_i(sqrt g Ginv_ij).
struct ChartLaplacian {
  Eigen::Matrix2d Ginv;
  Eigen::Vector2d b;
};

inline ChartLaplacian chart_laplacian(const SurfaceSingularChart& ch,
                                      double t1, double t2) {
  const Eigen::Vector3d x1 = ch.d1(t1, t2), x2 = ch.d2(t1, t2);
  const Eigen::Vector3d x11 = ch.d11(t1, t2), x12 = ch.d12(t1, t2),
                        x22 = ch.d22(t1, t2);
  Eigen::Matrix2d G;
  G << x1.dot(x1), x1.dot(x2), x2.dot(x1), x2.dot(x2);
  Eigen::Matrix2d dG[2];
  dG[0] << 2.0 * x1.dot(x11), x11.dot(x2) + x1.dot(x12),
      x11.dot(x2) + x1.dot(x12), 2.0 * x2.dot(x12);
  dG[1] << 2.0 * x1.dot(x12), x12.dot(x2) + x1.dot(x22),
      x12.dot(x2) + x1.dot(x22), 2.0 * x2.dot(x22);

  ChartLaplacian out;
  const double det = G.determinant();
  if (det <= 0.0)
    throw NumericalError("chart metric is degenerate at a stencil point");
  out.Ginv = G.inverse();
  for (int j = 0; j < 2; ++j) {
    double bj = 0.0;
    for (int i = 0; i < 2; ++i) {
      // (1/sqrt g) d_i sqrt g = tr(Ginv dG_i) / 2
      bj += 0.5 * (out.Ginv * dG[i]).trace() * out.Ginv(i, j);
      bj -= (out.Ginv * dG[i] * out.Ginv)(i, j);
    }
    out.b(j) = bj;
  }
  return out;
}

inline double wrap_angle(double a) {
  return std::remainder(a, 2.0 * M_PI);
}

}  // namespace detail

namespace detail {

// ---------------------------------------------------------------------------
// Pinch-zone patch.  Rings close to a conical pinch carry only a handful of
// nodes, so no local stencil there can resolve angular variation: a generic
// fit aliases the solution's angular content into O(1) noise amplified by
// the 1/G22 metric factor.  Boundedness of the operator across the pinch
// confines the solution to a low-dimensional structure space
//   u ~ a0 + a2 t1^2 + a3 t1^3 + a4 t1^4 + a5 t1^5 + a6 t1^6
//       + (b5c cos t2 + b5s sin t2) t1^5 + (b6c cos t2 + b6s sin t2) t1^6,
// (first angular harmonics enter at fifth order or later: a t1^4 harmonic
// would make the Laplacian angle-dependent at the pinch itself), plus the
// inward-decaying homogeneous layers t1 exp(-E/|t1|) of the first-harmonic
// radial equation, one per sheet, which carry the matching data from the
// surrounding surface and dominate the polynomial terms at the zone edge.
// The whole zone is eliminated through one least-squares patch solve
// combining continuity with a collar of resolvable rings and collocation of
// the equation inside the zone.  Each zone node's row then reads
//   u_i - (structure interpolant of collar values)_i = (load term)_i,
// an identity-diagonal transfer with bounded coefficients.  Writing PDE rows
// at the zone nodes themselves is unstable in two distinct ways that this
// construction avoids: per-node fits read high-order structure coefficients
// from ring-spacing differences (an h^-4 amplification, with adjacent rows
// relaying each other's noise), and reaction-only diagonals under a shared
// read-off lose coercivity because the Laplacian coupling is a low-rank
// matrix of norm far above c.
// ---------------------------------------------------------------------------
constexpr int kZoneCols = 14;
using ZoneRow = Eigen::Matrix<double, 1, kZoneCols>;

struct ZoneFit {
  std::vector<int> zone;    // rows this patch owns (incl. the singular node)
  std::vector<int> collar;  // anchor nodes supplying boundary data
  Eigen::MatrixXd T;        // zone x collar transfer matrix
  Eigen::VectorXd r;        // load part of the patch solve
  bool ready = false;
};

// Layer profiles: the inward-decaying solutions of the homogeneous radial
// first-harmonic equation g11 phi'' + b1 phi' - g22 phi = cbar phi on each
// sheet, integrated numerically in the stretched variable xi = -1/|t1|
// where they are clean exponentials (WKB: phi ~ |t1| exp(-E/|t1|) with
// E = sqrt(G11(0))/sigma, sigma the pinch rate of sqrt(G22)/t1^2).  Each is
// identically zero on the opposite sheet and flat to all orders at the
// pinch, so it is an admissible smooth basis member; because it solves the
// radial equation exactly, its operator read inside the patch is just
// cbar * phi, which keeps the collocation rows from suppressing the layer
// amplitudes the continuity data demands.
struct ZoneLayerModel {
  double tref = 0.0;                       // |t1| where profiles equal one
  double xi0 = 0.0, xi1 = 0.0, dxi = 0.0;  // grid in xi = -1/|t1|
  std::array<std::vector<double>, 2> v, dv, cb;  // per sheet: phi, dphi/dxi, cbar

  struct Eval {
    double v = 0.0, d1 = 0.0, cb = 0.0;  // value, d/dt1, reaction sample
  };
  Eval eval(double t1, double side) const {
    if (t1 * side <= 0.0) return {};
    const double s = std::abs(t1);
    const double xi = -1.0 / s;
    if (xi <= xi0) return {};  // deeper than 60 e-folds: layer is zero
    const int sh = side > 0.0 ? 0 : 1;
    const int m = static_cast<int>(v[sh].size()) - 1;
    const double u = (std::min(xi, xi1) - xi0) / dxi;
    const int k = std::min(std::max(static_cast<int>(u), 0), m - 1);
    const double a = u - k;
    const double val = (1.0 - a) * v[sh][k] + a * v[sh][k + 1];
    const double dxv = (1.0 - a) * dv[sh][k] + a * dv[sh][k + 1];
    const double cbv = (1.0 - a) * cb[sh][k] + a * cb[sh][k + 1];
    return {val, side * dxv / (s * s), cbv};
  }
};

inline ZoneLayerModel build_zone_layer_model(const SurfaceSingularChart& ch,
                                             const ScalarField3& c,
                                             double tref) {
  ZoneLayerModel M;
  M.tref = tref;
  const double st1 = 1e-3 * ch.valid_radius;
  const double sigma =
      std::sqrt(std::max(ch.metric(st1, 0.0)(1, 1), 0.0)) / (st1 * st1);
  if (!(sigma > 0.0))
    throw NumericalError("chart angular metric does not pinch correctly");
  const double G11 = ch.d1(0.0, 0.0).squaredNorm();
  const double E = std::sqrt(G11) / sigma;
  const double s0 = E / (60.0 + E / tref);
  M.xi0 = -1.0 / s0;
  M.xi1 = -1.0 / tref;
  const int m = 8192;
  M.dxi = (M.xi1 - M.xi0) / m;
  for (int sh = 0; sh < 2; ++sh) {
    const double side = sh == 0 ? 1.0 : -1.0;
    auto& V = M.v[sh];
    auto& DV = M.dv[sh];
    auto& CB = M.cb[sh];
    V.resize(m + 1);
    DV.resize(m + 1);
    CB.resize(m + 1);
    const auto rhs = [&](double xi, double p, double q, double* dp,
                         double* dq) {
      const double s = -1.0 / xi;
      const double t1 = side * s;
      const ChartLaplacian L = chart_laplacian(ch, t1, 0.0);
      const double cbv = c(ch.position(t1, 0.0));
      const double g11 = std::max(L.Ginv(0, 0), 1e-300);
      *dp = q;
      *dq = s * s * s * s * (L.Ginv(1, 1) + cbv) / g11 * p +
            (2.0 * s - side * L.b(0) * s * s / g11) * q;
    };
    // outward integration amplifies the wanted mode and damps the other,
    // so the start state only needs the WKB slope
    double p = 1.0, q = (E + s0) * 1.0;
    for (int k = 0; k <= m; ++k) {
      const double xi = M.xi0 + k * M.dxi;
      V[k] = p;
      DV[k] = q;
      CB[k] = c(ch.position(side * (-1.0 / xi), 0.0));
      if (k == m) break;
      const double h = M.dxi;
      double k1p, k1q, k2p, k2q, k3p, k3q, k4p, k4q;
      rhs(xi, p, q, &k1p, &k1q);
      rhs(xi + 0.5 * h, p + 0.5 * h * k1p, q + 0.5 * h * k1q, &k2p, &k2q);
      rhs(xi + 0.5 * h, p + 0.5 * h * k2p, q + 0.5 * h * k2q, &k3p, &k3q);
      rhs(xi + h, p + h * k3p, q + h * k3q, &k4p, &k4q);
      p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
      q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
      if (!std::isfinite(p) || !std::isfinite(q))
        throw NumericalError("pinch layer integration failed");
    }
    const double norm = V[m];
    if (!(norm > 0.0))
      throw NumericalError("pinch layer integration failed");
    for (int k = 0; k <= m; ++k) {
      V[k] /= norm;
      DV[k] /= norm;
    }
  }
  return M;
}

inline ZoneRow zone_basis(double t1, double t2, const ZoneLayerModel& M) {
  const double x2 = t1 * t1, x3 = x2 * t1, x4 = x3 * t1, x5 = x4 * t1,
               x6 = x5 * t1;
  const double ct = std::cos(t2), st = std::sin(t2);
  const double lp = M.eval(t1, +1.0).v;
  const double lm = M.eval(t1, -1.0).v;
  ZoneRow r;
  r << 1.0, x2, x3, x4, x5, x6, x5 * ct, x5 * st, x6 * ct, x6 * st, lp * ct,
      lp * st, lm * ct, lm * st;
  return r;
}

// Delta applied to each structure-basis member at chart point (t1, t2).  The
// 1/t1 meridian drift and the 1/G22 angular factor combine with the basis
// analytically, leaving bounded coefficients all the way to the pinch: for a
// profile t1^k the read is k(k-1) g11 t1^(k-2) + k b1 t1^(k-1), and a first
// harmonic phi(t1) e^(i t2) reads (g11 phi'' + b1 phi' - g22 phi) +
// i (2 g12 phi' + b2 phi) with g22 ~ 1/t1^4.  For the layer profiles the
// real part equals cbar * phi exactly, by the equation they solve.
inline ZoneRow zone_ell(const ChartLaplacian& L, double t1, double t2,
                        const ZoneLayerModel& M) {
  const double ct = std::cos(t2), st = std::sin(t2);
  const double g11 = L.Ginv(0, 0), g12 = L.Ginv(0, 1), g22 = L.Ginv(1, 1);
  const double b1 = L.b(0), b2 = L.b(1);
  const double x2 = t1 * t1, x3 = x2 * t1, x4 = x3 * t1, x5 = x4 * t1,
               x6 = x5 * t1;
  const double p5 = 20.0 * g11 * x3 + 5.0 * b1 * x4 - g22 * x5;
  const double q5 = 10.0 * g12 * x4 + b2 * x5;
  const double p6 = 30.0 * g11 * x4 + 6.0 * b1 * x5 - g22 * x6;
  const double q6 = 12.0 * g12 * x5 + b2 * x6;
  const ZoneLayerModel::Eval Lp = M.eval(t1, +1.0);
  const ZoneLayerModel::Eval Lm = M.eval(t1, -1.0);
  const double pp = Lp.cb * Lp.v;
  const double qp = 2.0 * g12 * Lp.d1 + b2 * Lp.v;
  const double pm = Lm.cb * Lm.v;
  const double qm = 2.0 * g12 * Lm.d1 + b2 * Lm.v;
  ZoneRow r;
  r << 0.0,                                  // 1
      2.0 * g11 + 2.0 * b1 * t1,             // t1^2
      6.0 * g11 * t1 + 3.0 * b1 * x2,        // t1^3
      12.0 * g11 * x2 + 4.0 * b1 * x3,       // t1^4
      20.0 * g11 * x3 + 5.0 * b1 * x4,       // t1^5
      30.0 * g11 * x4 + 6.0 * b1 * x5,       // t1^6
      p5 * ct - q5 * st,                     // t1^5 cos t2
      p5 * st + q5 * ct,                     // t1^5 sin t2
      p6 * ct - q6 * st,                     // t1^6 cos t2
      p6 * st + q6 * ct,                     // t1^6 sin t2
      pp * ct - qp * st,                     // layer+, cos
      pp * st + qp * ct,                     // layer+, sin
      pm * ct - qm * st,                     // layer-, cos
      pm * st + qm * ct;                     // layer-, sin
  return r;
}

}  // namespace detail

// Assemble -Laplacian(u) + c u = f over the mesh.  Smooth nodes away from
// charts get tangent-plane quadratic-fit rows; chart nodes on angularly
// resolvable rings get the full variable-metric operator in chart
// coordinates; nodes on sparse near-pinch rings and the singular node itself
// are eliminated through one structure patch per chart.
inline LinearSystem assemble_surface_system(const SurfaceMesh& mesh,
                                            const ScalarField3& c,
                                            const ScalarField3& f,
                                            const SurfaceSolveOptions& opt = {}) {
  const int n = static_cast<int>(mesh.size());
  LinearSystem sys(n);
  const double eps = opt.eps_scale * mesh.spacing * mesh.spacing;

  // Ring density thresholds, in nodes per ring (circumference over spacing).
  // Rings thinner than zone_rings cannot be resolved angularly by any local
  // stencil -- a generic fit would alias the solution's angular content into
  // O(1) noise amplified by the 1/G22 metric factor -- so their nodes join
  // the chart's shared structure fit, which also takes a collar of denser
  // rings so the quartic profile is pinned at the zone scale.
  constexpr double zone_rings = 8.0;
  constexpr double collar_rings = 14.0;

  // classify every node against the declared charts
  std::vector<int> chart_of(n, -1);
  std::vector<Eigen::Vector2d> tcs(n, Eigen::Vector2d::Zero());
  std::vector<double> ring(n, std::numeric_limits<double>::infinity());
  for (int i = 0; i < n; ++i) {
    const SurfaceNode& nd = mesh.nodes[i];
    if (nd.singular) {
      chart_of[i] = nd.chart;
      ring[i] = 0.0;
      continue;
    }
    for (std::size_t q = 0; q < mesh.charts.size(); ++q) {
      const SurfaceSingularChart& ch = mesh.charts[q];
      if (!ch.coords || (nd.p - ch.location).norm() > ch.reach) continue;
      const Eigen::Vector2d t = ch.coords(nd.p);
      if (std::abs(t.x()) > ch.valid_radius) continue;
      chart_of[i] = static_cast<int>(q);
      tcs[i] = t;
      ring[i] = 2.0 * M_PI *
                std::sqrt(std::max(ch.metric(t.x(), t.y())(1, 1), 0.0)) /
                mesh.spacing;
      break;
    }
  }

  // Solve the structure patch for every chart that owns zone nodes and emit
  // the resulting transfer rows right away.
  std::vector<char> handled(n, 0);
  for (std::size_t q = 0; q < mesh.charts.size(); ++q) {
    detail::ZoneFit Z;
    for (int i = 0; i < n; ++i) {
      if (chart_of[i] != static_cast<int>(q)) continue;
      if (mesh.nodes[i].singular || ring[i] < zone_rings)
        Z.zone.push_back(i);
      else if (ring[i] < collar_rings)
        Z.collar.push_back(i);
    }
    if (Z.zone.empty()) continue;
    const SurfaceSingularChart& ch = mesh.charts[q];
    if (!ch.coords || !ch.d1)
      throw ConfigError("singular chart lacks usable coordinates");
    const double G11 = ch.d1(0.0, 0.0).squaredNorm();
    if (G11 <= 0.0)
      throw NumericalError("chart meridian velocity vanishes at the center");
    const int nz = static_cast<int>(Z.zone.size());
    const int ncol = static_cast<int>(Z.collar.size());
    if (ncol < 6)
      throw NumericalError("pinch zone lacks anchor nodes around it");
    bool plus = false, minus = false;
    double tref = 0.0;
    for (int i : Z.zone)
      if (!mesh.nodes[i].singular) {
        (tcs[i].x() > 0.0 ? plus : minus) = true;
        tref = std::max(tref, std::abs(tcs[i].x()));
      }
    for (int i : Z.collar) {
      (tcs[i].x() > 0.0 ? plus : minus) = true;
      tref = std::max(tref, std::abs(tcs[i].x()));
    }
    if (!plus || !minus)
      throw NumericalError(
          "pinch-zone nodes do not straddle the singular point");

    const detail::ZoneLayerModel zp = detail::build_zone_layer_model(ch, c, tref);

    // Patch system: continuity with each collar value, then collocation of
    // c u - Delta u = f at every patch point.  At the pinch itself the drift
    // limit b1 t1 -> 2 g11(0) turns the t1^2 read into 6 / G11(0) and every
    // other basis member's read vanishes.
    const int npde = nz + ncol;
    const int rows = ncol + npde;
    Eigen::MatrixXd A(rows, detail::kZoneCols);
    Eigen::VectorXd fv(npde);
    for (int k = 0; k < ncol; ++k) {
      const int i = Z.collar[k];
      A.row(k) = detail::zone_basis(tcs[i].x(), tcs[i].y(), zp);
    }
    const auto pde_row = [&](int i) -> detail::ZoneRow {
      const SurfaceNode& nd = mesh.nodes[i];
      if (nd.singular) {
        detail::ZoneRow ell0 = detail::ZoneRow::Zero();
        ell0(1) = 6.0 / G11;
        return c(nd.p) * detail::zone_basis(0.0, 0.0, zp) - ell0;
      }
      const detail::ChartLaplacian L =
          detail::chart_laplacian(ch, tcs[i].x(), tcs[i].y());
      return c(nd.p) * detail::zone_basis(tcs[i].x(), tcs[i].y(), zp) -
             detail::zone_ell(L, tcs[i].x(), tcs[i].y(), zp);
    };
    for (int k = 0; k < nz; ++k) {
      A.row(ncol + k) = pde_row(Z.zone[k]);
      fv(k) = f(mesh.nodes[Z.zone[k]].p);
    }
    for (int k = 0; k < ncol; ++k) {
      A.row(ncol + nz + k) = pde_row(Z.collar[k]);
      fv(nz + k) = f(mesh.nodes[Z.collar[k]].p);
    }

    // Equilibrate the columns so conditioning measures geometry, not units.
    // An angular column collapses to zero when the whole patch sits at two
    // opposite angles (a pure meridian ladder); drop it so the minimum-norm
    // solve ignores that direction instead of normalizing noise.
    Eigen::VectorXd cs(detail::kZoneCols);
    for (int k = 0; k < detail::kZoneCols; ++k)
      cs(k) = A.col(k).cwiseAbs().maxCoeff();
    const double cref = cs.head(6).maxCoeff();
    for (int k = 6; k < detail::kZoneCols; ++k)
      if (cs(k) < 1e-10 * cref) {
        A.col(k).setZero();
        cs(k) = 1.0;
      }
    for (int k = 0; k < detail::kZoneCols; ++k) {
      cs(k) = std::max(cs(k), 1e-300);
      A.col(k) /= cs(k);
    }
    int rank = 0;
    double cond = 0.0;
    const Eigen::MatrixXd P =
        detail::ls_coef_map(A, Eigen::VectorXd::Ones(rows), &rank, &cond);
    if (rank < 4 || cond * cond > 1e14)
      throw NumericalError("pinch-zone patch solve is degenerate");

    // zone values from scaled coefficients: u_zone = Bz (P [u_collar; f])
    Eigen::MatrixXd Bz(nz, detail::kZoneCols);
    for (int k = 0; k < nz; ++k) {
      const int i = Z.zone[k];
      const detail::ZoneRow b =
          mesh.nodes[i].singular
              ? detail::zone_basis(0.0, 0.0, zp)
              : detail::zone_basis(tcs[i].x(), tcs[i].y(), zp);
      Bz.row(k) = b.cwiseQuotient(cs.transpose());
    }
    const Eigen::MatrixXd M = Bz * P;
    Z.T = M.leftCols(ncol);
    Z.r = M.rightCols(npde) * fv;
    if (Z.T.cwiseAbs().rowwise().sum().maxCoeff() > 1e4)
      throw NumericalError("pinch-zone transfer grew unstable weights");

    for (int k = 0; k < nz; ++k) {
      const int i = Z.zone[k];
      sys.add(i, i, 1.0);
      for (int jc = 0; jc < ncol; ++jc)
        sys.add(i, Z.collar[jc], -Z.T(k, jc));
      sys.set_rhs(i, Z.r(k));
      handled[i] = 1;
    }
  }

  for (int i = 0; i < n; ++i) {
    const SurfaceNode& nd = mesh.nodes[i];
    if (handled[i]) continue;
    if (nd.singular)
      throw ConfigError("singular node lacks a usable chart");
    const int cq = chart_of[i];

    std::vector<int> ids;
    std::vector<Eigen::Vector2d> coords;
    std::vector<double> w;
    ids.push_back(i);

    if (cq >= 0 &&
        std::abs(tcs[i].x()) <
            opt.chart_fraction * mesh.charts[cq].valid_radius) {
      // chart row on a dense ring: the full variable-metric operator
      //   Delta u = Ginv_ij d2u/didj + b_j du/dj
      // through a quadratic fit in e = (dt1, sqrt(G22) dt2), so the fit sees
      // geometric distances; d1 -> d/de1, d2 -> sqrt(G22) d/de2
      const SurfaceSingularChart& ch = mesh.charts[cq];
      const Eigen::Vector2d tc = tcs[i];
      const detail::ChartLaplacian L =
          detail::chart_laplacian(ch, tc.x(), tc.y());
      const double s2 =
          std::sqrt(std::max(ch.metric(tc.x(), tc.y())(1, 1), 1e-300));
      coords.emplace_back(0.0, 0.0);
      for (int j : mesh.neighbors[i]) {
        const Eigen::Vector2d t = ch.coords(mesh.nodes[j].p);
        ids.push_back(j);
        coords.emplace_back(t.x() - tc.x(),
                            s2 * detail::wrap_angle(t.y() - tc.y()));
      }
      Eigen::Matrix<double, 1, 6> ell;
      ell << 0.0, L.b(0), s2 * L.b(1), 2.0 * L.Ginv(0, 0),
          2.0 * s2 * L.Ginv(0, 1), s2 * s2 * 2.0 * L.Ginv(1, 1);
      w = functional_weights_2d(coords, ell, eps);
    } else {
      // tangent-plane row: flat Laplacian in projection coordinates
      coords.emplace_back(0.0, 0.0);
      for (const auto& [j, t] : stencil_local_coords(mesh, i)) {
        ids.push_back(j);
        coords.push_back(t);
      }
      w = laplacian_weights_2d(coords, eps);
    }

    // row: -Delta u + c u = f; ellipticity requires the center's Laplacian
    // weight to be negative so its -Delta contribution is positive
    if (w[0] >= 0.0)
      throw NumericalError("discrete operator lost ellipticity at a node");
    for (std::size_t q = 0; q < ids.size(); ++q)
      sys.add(i, ids[q], -w[q]);
    sys.add(i, i, c(nd.p));
    sys.set_rhs(i, f(nd.p));
  }

  return sys;
}

inline std::vector<double> solve_on_surface_mesh(
    const SurfaceMesh& mesh, const ScalarField3& c, const ScalarField3& f,
    const SurfaceSolveOptions& opt = {}) {
  LinearSystem sys = assemble_surface_system(mesh, c, f, opt);
  return sys.solve(opt.tol);
}

}  // namespace algpde
