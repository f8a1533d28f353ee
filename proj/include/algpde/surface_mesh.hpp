#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "algpde/errors.hpp"
#include "algpde/polynomial.hpp"

namespace algpde {

// ---------------------------------------------------------------------------
// Implicit surface F(x, y, z) = 0 with derivatives, projection, and the
// deterministic tangent-basis rule.
// ---------------------------------------------------------------------------
class ImplicitSurface {
 public:
  explicit ImplicitSurface(Polynomial f) : f_(std::move(f)) {
    if (f_.nvars() != 3)
      throw ConfigError("an implicit surface needs a trivariate polynomial");
    grad_ = f_.gradient();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) hess_[i][j] = grad_[i].derivative(j);
    for (const auto& [e, c] : f_.terms()) coeff_scale_ += std::abs(c);
    if (coeff_scale_ == 0.0) throw ConfigError("zero polynomial");
  }

  const Polynomial& polynomial() const { return f_; }

  double value_scale(const Eigen::Vector3d& p) const {
    return coeff_scale_ *
           std::pow(std::max(1.0, p.lpNorm<Eigen::Infinity>()),
                    f_.total_degree());
  }

  double value(const Eigen::Vector3d& p) const { return f_.evaluate(p.data()); }

  Eigen::Vector3d grad(const Eigen::Vector3d& p) const {
    return {grad_[0].evaluate(p.data()), grad_[1].evaluate(p.data()),
            grad_[2].evaluate(p.data())};
  }

  Eigen::Matrix3d hess(const Eigen::Vector3d& p) const {
    Eigen::Matrix3d H;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) H(i, j) = hess_[i][j].evaluate(p.data());
    return H;
  }

  // Gauss-Newton projection onto the zero set
  Eigen::Vector3d project(Eigen::Vector3d p, double rel_tol = 1e-14) const {
    for (int it = 0; it < 100; ++it) {
      const double v = value(p);
      if (std::abs(v) <= rel_tol * value_scale(p)) return p;
      const Eigen::Vector3d g = grad(p);
      const double g2 = g.squaredNorm();
      if (g2 < 1e-300)
        throw NumericalError("projection hit a critical point of the surface");
      p -= (v / g2) * g;
    }
    if (std::abs(value(p)) <= 1e4 * rel_tol * value_scale(p)) return p;
    throw NumericalError("projection onto the surface did not converge");
  }

  // Orthonormal tangent basis at a smooth point.  Deterministic: w1 is the
  // normalized cross product of the gradient with the coordinate axis least
  // parallel to it (smallest index on ties), w2 completes the frame.
  std::pair<Eigen::Vector3d, Eigen::Vector3d> tangent_basis(
      const Eigen::Vector3d& p) const {
    const Eigen::Vector3d g = grad(p);
    const double gn = g.norm();
    if (gn < 1e-12 * coeff_scale_)
      throw NumericalError("tangent basis requested at a near-singular point");
    int axis = 0;
    for (int j = 1; j < 3; ++j)
      if (std::abs(g[j]) < std::abs(g[axis])) axis = j;
    Eigen::Vector3d e = Eigen::Vector3d::Zero();
    e[axis] = 1.0;
    Eigen::Vector3d w1 = e.cross(g).normalized();
    Eigen::Vector3d w2 = g.cross(w1).normalized();
    return {w1, w2};
  }

 private:
  Polynomial f_;
  std::vector<Polynomial> grad_;
  Polynomial hess_[3][3];
  double coeff_scale_ = 0.0;
};

// ---------------------------------------------------------------------------
// Closed-form chart at an isolated surface singularity: a local
// parameterization X(t1, t2) whose t2-circles collapse at t1 = 0 (the
// singular point).  position/derivatives come from the configuration; coords
// inverts the chart for points within `reach` of the singular location.
// ---------------------------------------------------------------------------
struct SurfaceSingularChart {
  Eigen::Vector3d location = Eigen::Vector3d::Zero();
  std::function<Eigen::Vector3d(double, double)> position;
  std::function<Eigen::Vector3d(double, double)> d1, d2;
  std::function<Eigen::Vector3d(double, double)> d11, d12, d22;
  std::function<Eigen::Vector2d(const Eigen::Vector3d&)> coords;
  double valid_radius = 0.0;  // |t1| range the chart may be used on
  double reach = 0.0;         // Euclidean radius where coords() is valid

  Eigen::Matrix2d metric(double t1, double t2) const {
    const Eigen::Vector3d x1 = d1(t1, t2), x2 = d2(t1, t2);
    Eigen::Matrix2d G;
    G << x1.dot(x1), x1.dot(x2), x2.dot(x1), x2.dot(x2);
    return G;
  }
};

struct SurfaceNode {
  Eigen::Vector3d p;
  Eigen::Vector3d w1 = Eigen::Vector3d::Zero();
  Eigen::Vector3d w2 = Eigen::Vector3d::Zero();
  bool singular = false;
  int chart = -1;  // chart index for singular nodes
};

struct SurfaceMesh {
  std::vector<SurfaceNode> nodes;
  std::vector<std::vector<int>> neighbors;  // k nearest, singular excluded
  std::vector<SurfaceSingularChart> charts;
  std::shared_ptr<const ImplicitSurface> surface;
  double spacing = 0.0;  // median nearest-neighbor distance

  std::size_t size() const { return nodes.size(); }
};

// Tangent-plane coordinates of node i's k-nearest stencil: (index, t) pairs
// with t = ((q - p)·w1, (q - p)·w2).  Rejects stencils whose neighbors
// cluster along a line: they must cover at least three of the eight angular
// sectors around the node, or the quadratic fit normal matrix degenerates.
inline std::vector<std::pair<int, Eigen::Vector2d>> stencil_local_coords(
    const SurfaceMesh& mesh, int i, int k = 0) {
  const SurfaceNode& nd = mesh.nodes[i];
  if (nd.singular)
    throw ConfigError("tangent stencils are only defined at smooth nodes");
  const std::vector<int>& nb = mesh.neighbors[i];
  if (k <= 0) k = static_cast<int>(nb.size());
  if (k > static_cast<int>(nb.size()))
    throw ConfigError("stencil request exceeds the stored neighbor count");
  std::vector<std::pair<int, Eigen::Vector2d>> out;
  out.reserve(k);
  bool sector[8] = {false, false, false, false, false, false, false, false};
  for (int q = 0; q < k; ++q) {
    const Eigen::Vector3d d = mesh.nodes[nb[q]].p - nd.p;
    const Eigen::Vector2d t(d.dot(nd.w1), d.dot(nd.w2));
    sector[static_cast<int>(
        std::floor((std::atan2(t.y(), t.x()) + M_PI) / (M_PI / 4.0))) &
           7] = true;
    out.emplace_back(nb[q], t);
  }
  int covered = 0;
  for (bool s : sector) covered += s ? 1 : 0;
  if (covered < 3)
    throw NumericalError(
        "stencil neighbors cluster along a line; increase the stencil size");
  return out;
}

// Generator parameterization of a surface of revolution: X(phi, theta) with
// phi along the meridian and theta the revolution angle.  All bundled
// geometries are ring-generated; scattered seed clouds are out of scope.
struct RingGenerator {
  std::function<Eigen::Vector3d(double, double)> X;
  double phi_min = 0.0;
  double phi_max = 0.0;
  bool periodic = false;  // meridian closes on itself (torus-like)
};

struct SurfaceMeshOptions {
  int neighbors = 8;
  int singular_neighbors = 12;
  double on_surface_tol = 1e-10;
};

namespace detail {

// 5-point Gauss-Legendre on [a, b]
template <class Fn>
double gauss5(const Fn& f, double a, double b) {
  static const double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                               0.5384693101056831, 0.9061798459386640};
  static const double gw[5] = {0.2369268850561891, 0.4786286704993665,
                               0.5688888888888889, 0.4786286704993665,
                               0.2369268850561891};
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double s = 0.0;
  for (int k = 0; k < 5; ++k) s += gw[k] * f(mid + half * gx[k]);
  return s * half;
}

inline Eigen::Vector3d gen_dphi(const RingGenerator& gen, double phi,
                                double theta, double step) {
  return (gen.X(phi + step, theta) - gen.X(phi - step, theta)) / (2.0 * step);
}

inline Eigen::Vector3d gen_dtheta(const RingGenerator& gen, double phi,
                                  double theta, double step) {
  return (gen.X(phi, theta + step) - gen.X(phi, theta - step)) / (2.0 * step);
}

// Bucketed k-nearest-neighbor search over a fixed point set.
class NeighborGrid {
 public:
  NeighborGrid(const std::vector<Eigen::Vector3d>& pts, double cell)
      : pts_(pts), cell_(cell), total_(static_cast<int>(pts.size())) {
    for (std::size_t i = 0; i < pts.size(); ++i)
      cells_[key(pts[i])].push_back(static_cast<int>(i));
  }

  // k nearest points to pts_[i], excluding i itself and any index for which
  // skip(index) is true.
  std::vector<int> nearest(int i, int k,
                           const std::function<bool(int)>& skip) const {
    const Eigen::Vector3d& p = pts_[i];
    std::vector<std::pair<double, int>> cand;
    for (int ring = 1; ring < 64; ++ring) {
      cand.clear();
      gather(p, ring, cand, i, skip);
      // Everything within ring-1 cells of p is guaranteed collected, so the
      // k-th candidate is final once it lies inside that radius.
      if (static_cast<int>(cand.size()) >= k) {
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
        if (cand[k - 1].first <= static_cast<double>(ring - 1) * cell_ ||
            static_cast<int>(cand.size()) == total_ - 1) {
          std::vector<int> out(k);
          for (int q = 0; q < k; ++q) out[q] = cand[q].second;
          return out;
        }
      }
      if (static_cast<int>(cand.size()) == total_ - 1) break;
    }
    throw NumericalError("neighbor search failed to gather enough points");
  }

 private:
  std::int64_t key(const Eigen::Vector3d& p) const {
    const auto cx = static_cast<std::int64_t>(std::floor(p.x() / cell_));
    const auto cy = static_cast<std::int64_t>(std::floor(p.y() / cell_));
    const auto cz = static_cast<std::int64_t>(std::floor(p.z() / cell_));
    return ((cx & 0x1fffff) << 42) | ((cy & 0x1fffff) << 21) | (cz & 0x1fffff);
  }

  void gather(const Eigen::Vector3d& p, int ring,
              std::vector<std::pair<double, int>>& cand, int self,
              const std::function<bool(int)>& skip) const {
    const auto cx = static_cast<std::int64_t>(std::floor(p.x() / cell_));
    const auto cy = static_cast<std::int64_t>(std::floor(p.y() / cell_));
    const auto cz = static_cast<std::int64_t>(std::floor(p.z() / cell_));
    for (std::int64_t ix = cx - ring; ix <= cx + ring; ++ix)
      for (std::int64_t iy = cy - ring; iy <= cy + ring; ++iy)
        for (std::int64_t iz = cz - ring; iz <= cz + ring; ++iz) {
          const std::int64_t kk = ((ix & 0x1fffff) << 42) |
                                  ((iy & 0x1fffff) << 21) | (iz & 0x1fffff);
          const auto it = cells_.find(kk);
          if (it == cells_.end()) continue;
          for (int j : it->second) {
            if (j == self || skip(j)) continue;
            cand.emplace_back((pts_[j] - p).norm(), j);
          }
        }
  }

  const std::vector<Eigen::Vector3d>& pts_;
  double cell_;
  std::unordered_map<std::int64_t, std::vector<int>> cells_;
  int total_ = 0;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Sample about N^2 approximately uniform points: latitude rings spaced
// evenly in meridian arclength, each carrying round(circumference / spacing)
// staggered nodes, all projected onto F = 0.  Isolated projection failures
// are dropped, up to 0.1% of the set.
// ---------------------------------------------------------------------------
inline std::vector<Eigen::Vector3d> sample_surface(const ImplicitSurface& S,
                                                   const RingGenerator& gen,
                                                   int N,
                                                   double* spacing_out =
                                                       nullptr) {
  if (N < 4) throw ConfigError("surface meshes need N >= 4");
  if (!gen.X) throw ConfigError("surface generator is missing");

  // meridian arclength and surface area from the generator
  const double span = gen.phi_max - gen.phi_min;
  if (span <= 0.0) throw ConfigError("generator meridian range is empty");
  const double dstep = 1e-6 * span;
  const int coarse = 512;
  std::vector<double> phi_knot(coarse + 1), arc_knot(coarse + 1);
  double area = 0.0;
  for (int k = 0; k <= coarse; ++k)
    phi_knot[k] = gen.phi_min + span * k / coarse;
  arc_knot[0] = 0.0;
  for (int k = 0; k < coarse; ++k) {
    const double a = phi_knot[k], b = phi_knot[k + 1];
    arc_knot[k + 1] =
        arc_knot[k] + detail::gauss5(
                          [&](double t) {
                            return detail::gen_dphi(gen, t, 0.0, dstep).norm();
                          },
                          a, b);
    // revolution area element: |X_phi| |X_theta| dphi dtheta
    area += detail::gauss5(
        [&](double t) {
          return detail::gen_dphi(gen, t, 0.0, dstep).norm() *
                 detail::gen_dtheta(gen, t, 0.0, dstep).norm();
        },
        a, b);
  }
  area *= 2.0 * M_PI;
  const double meridian = arc_knot[coarse];
  const double tau = std::sqrt(area) / N;  // target spacing
  if (spacing_out) *spacing_out = tau;

  auto phi_at_arc = [&](double s) {
    const auto it = std::upper_bound(arc_knot.begin(), arc_knot.end(), s);
    std::size_t k = std::min<std::size_t>(
        arc_knot.size() - 2, std::max<std::ptrdiff_t>(
                                 0, std::distance(arc_knot.begin(), it) - 1));
    const double w = (s - arc_knot[k]) / (arc_knot[k + 1] - arc_knot[k]);
    return phi_knot[k] + w * (phi_knot[k + 1] - phi_knot[k]);
  };

  // Rings along the meridian.  A periodic meridian (torus) gets rings at
  // band midpoints so a declared pinch between bands stays clear of nodes; an
  // open meridian (sphere-like) gets rings at band edges including both
  // endpoints, placing one node exactly on each pole — the poles are where
  // curvature concentrates on elongated surfaces, and a node there keeps the
  // surrounding stencils symmetric.
  const int M = std::max(3, static_cast<int>(std::lround(meridian / tau)));
  const int rings = gen.periodic ? M : M + 1;
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(static_cast<std::size_t>(N) * N + 8);
  std::size_t attempted = 0, failed = 0;
  for (int i = 0; i < rings; ++i) {
    const double s = gen.periodic ? meridian * (i + 0.5) / M : meridian * i / M;
    const double phi = phi_at_arc(s);
    const double circ =
        2.0 * M_PI * detail::gen_dtheta(gen, phi, 0.0, dstep).norm();
    const int ni = std::max(1, static_cast<int>(std::lround(circ / tau)));
    const double off = 0.5 * (i % 2);
    for (int j = 0; j < ni; ++j) {
      const double theta = 2.0 * M_PI * (j + off) / ni;
      ++attempted;
      try {
        pts.push_back(S.project(gen.X(phi, theta)));
      } catch (const NumericalError&) {
        ++failed;
      }
    }
  }
  if (failed * 1000 > attempted)
    throw NumericalError("more than 0.1% of sample points failed to project");
  return pts;
}

inline std::vector<Eigen::Vector3d> sample_surface(const Polynomial& F,
                                                   const RingGenerator& gen,
                                                   int N) {
  return sample_surface(ImplicitSurface(F), gen, N);
}

// ---------------------------------------------------------------------------
// Build the mesh: sampled smooth nodes with tangent bases and k-nearest
// neighbor lists, plus one dedicated node per declared singular point,
// excluded from every neighbor list.
// ---------------------------------------------------------------------------
inline SurfaceMesh build_surface_mesh(
    const Polynomial& F, const RingGenerator& gen, int N,
    const std::vector<SurfaceSingularChart>& charts = {},
    const SurfaceMeshOptions& opt = {}) {
  SurfaceMesh mesh;
  mesh.surface = std::make_shared<ImplicitSurface>(F);
  mesh.charts = charts;
  const ImplicitSurface& S = *mesh.surface;

  double tau = 0.0;
  std::vector<Eigen::Vector3d> pts = sample_surface(S, gen, N, &tau);

  // reject generated points that collide with a declared singular point,
  // then append the singular nodes themselves
  for (const Eigen::Vector3d& p : pts)
    for (const SurfaceSingularChart& ch : charts)
      if ((p - ch.location).norm() < 0.45 * tau)
        throw NumericalError(
            "generator produced a point on top of a singular point");
  const int smooth_count = static_cast<int>(pts.size());
  for (const SurfaceSingularChart& ch : charts) pts.push_back(ch.location);

  // neighbor lists (singular nodes excluded from everyone's list)
  detail::NeighborGrid grid(pts, 2.0 * tau);
  auto skip_singular = [&](int j) { return j >= smooth_count; };
  mesh.neighbors.resize(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const int k = static_cast<int>(i) < smooth_count ? opt.neighbors
                                                     : opt.singular_neighbors;
    mesh.neighbors[i] = grid.nearest(static_cast<int>(i), k, skip_singular);
  }

  // nodes with tangent bases
  mesh.nodes.resize(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    SurfaceNode& nd = mesh.nodes[i];
    nd.p = pts[i];
    if (static_cast<int>(i) >= smooth_count) {
      nd.singular = true;
      nd.chart = static_cast<int>(i) - smooth_count;
      continue;
    }
    if (std::abs(S.value(nd.p)) > opt.on_surface_tol * S.value_scale(nd.p))
      throw NumericalError("mesh node failed to land on the surface");
    std::tie(nd.w1, nd.w2) = S.tangent_basis(nd.p);
  }

  // median nearest-neighbor spacing, plus the coverage contract
  std::vector<double> nn(smooth_count);
  for (int i = 0; i < smooth_count; ++i)
    nn[i] = (pts[mesh.neighbors[i][0]] - pts[i]).norm();
  std::vector<double> sorted = nn;
  std::nth_element(sorted.begin(), sorted.begin() + smooth_count / 2,
                   sorted.end());
  mesh.spacing = sorted[smooth_count / 2];
  for (int i = 0; i < smooth_count; ++i)
    if (nn[i] > 4.0 * mesh.spacing)
      throw NumericalError("coverage gap: an isolated node in the sampling");

  return mesh;
}

// Convenience generators for the bundled geometries.

// x^2 + a (y^2 + z^2) = 1, meridian from pole (-1,0,0) to pole (1,0,0)
inline RingGenerator ellipsoid_generator(double a) {
  if (a <= 0.0) throw ConfigError("ellipsoid parameter must be positive");
  RingGenerator gen;
  const double b = 1.0 / std::sqrt(a);
  gen.X = [b](double phi, double theta) {
    return Eigen::Vector3d(-std::cos(phi), b * std::sin(phi) * std::cos(theta),
                           b * std::sin(phi) * std::sin(theta));
  };
  gen.phi_min = 0.0;
  gen.phi_max = M_PI;
  gen.periodic = false;
  return gen;
}

// (x^2 + y^2 + z^2)^2 = 4 (x^2 + y^2), pinched at the origin (phi = pi)
inline RingGenerator horn_torus_generator() {
  RingGenerator gen;
  gen.X = [](double phi, double theta) {
    const double r = 1.0 + std::cos(phi);
    return Eigen::Vector3d(r * std::cos(theta), r * std::sin(theta),
                           std::sin(phi));
  };
  gen.phi_min = 0.0;
  gen.phi_max = 2.0 * M_PI;
  gen.periodic = true;
  return gen;
}

// The horn torus chart X(t1,t2) = (t1^2 cos t2, t1^2 sin t2, t1 sqrt(2-t1^2)):
// t2-circles collapse like t1^2 at the pinch, and signed t1 crosses it.
inline SurfaceSingularChart horn_torus_chart() {
  SurfaceSingularChart ch;
  ch.location = Eigen::Vector3d::Zero();
  ch.position = [](double t1, double t2) {
    return Eigen::Vector3d(t1 * t1 * std::cos(t2), t1 * t1 * std::sin(t2),
                           t1 * std::sqrt(2.0 - t1 * t1));
  };
  ch.d1 = [](double t1, double t2) {
    const double s = std::sqrt(2.0 - t1 * t1);
    return Eigen::Vector3d(2.0 * t1 * std::cos(t2), 2.0 * t1 * std::sin(t2),
                           s - t1 * t1 / s);
  };
  ch.d2 = [](double t1, double t2) {
    return Eigen::Vector3d(-t1 * t1 * std::sin(t2), t1 * t1 * std::cos(t2),
                           0.0);
  };
  ch.d11 = [](double t1, double t2) {
    const double s = std::sqrt(2.0 - t1 * t1);
    return Eigen::Vector3d(2.0 * std::cos(t2), 2.0 * std::sin(t2),
                           -3.0 * t1 / s - t1 * t1 * t1 / (s * s * s));
  };
  ch.d12 = [](double t1, double t2) {
    return Eigen::Vector3d(-2.0 * t1 * std::sin(t2), 2.0 * t1 * std::cos(t2),
                           0.0);
  };
  ch.d22 = [](double t1, double t2) {
    return Eigen::Vector3d(-t1 * t1 * std::cos(t2), -t1 * t1 * std::sin(t2),
                           0.0);
  };
  ch.coords = [](const Eigen::Vector3d& p) {
    const double t1 = std::copysign(
        std::pow(p.x() * p.x() + p.y() * p.y(), 0.25), p.z() == 0.0 ? 1.0 : p.z());
    return Eigen::Vector2d(t1, std::atan2(p.y(), p.x()));
  };
  ch.valid_radius = 1.2;
  ch.reach = std::sqrt(2.0) * 1.2;
  return ch;
}

}  // namespace algpde
