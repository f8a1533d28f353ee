#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <vector>

#include "algpde/curve_trace.hpp"

namespace algpde {

struct CurveNode {
  enum class Kind { Smooth, Crossing, Cusp };
  Eigen::Vector2d p;
  Eigen::Vector2d tangent;  // unit, traversal orientation
  Kind kind = Kind::Smooth;
  int passage = -1;      // Crossing/Cusp: index into the passage-spec list
  int chart_id = -1;     // spec whose series chart placed this node (-1: none)
  double chart_s = 0.0;  // chart coordinate when chart_id >= 0
};

struct MeshPassage {
  SingularPassageSpec::Kind kind = SingularPassageSpec::Kind::Crossing;
  Eigen::Vector2d location;
  std::shared_ptr<const SeriesChart> chart;  // series passages only
  int spec = -1;  // index into the passage-spec list
  int node = -1;  // index of the passage node in the final cyclic order
};

struct CurveMesh {
  std::vector<CurveNode> nodes;  // cyclic traversal order; node 0 nearest seed
  std::vector<double> gaps;      // arclength node i -> i+1 (cyclic)
  std::vector<MeshPassage> passages;
  std::shared_ptr<const ImplicitCurve> curve;
  double length = 0.0;
  double h = 0.0;  // target gap L / N

  std::size_t size() const { return nodes.size(); }
};

struct MeshOptions {
  int n = 0;                      // exact node count (required)
  double coarse_step = 0.0;       // 0: auto from the seed scale
  double fine_step_factor = 8.0;  // fine trace step = h / factor
};

namespace detail {

// positive remainder of a modulo period
inline double wrap_arc(double a, double period) {
  a = std::fmod(a, period);
  if (a < 0.0) a += period;
  return a;
}

// partial arclength of the cubic Hermite segment up to parameter xi
inline double hermite_arc_partial(const Eigen::Vector2d& p0,
                                  const Eigen::Vector2d& t0,
                                  const Eigen::Vector2d& p1,
                                  const Eigen::Vector2d& t1, double xi) {
  static const double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                               0.5384693101056831, 0.9061798459386640};
  static const double gw[5] = {0.2369268850561891, 0.4786286704993665,
                               0.5688888888888889, 0.4786286704993665,
                               0.2369268850561891};
  const double c = (p1 - p0).norm();
  double acc = 0.0;
  for (int k = 0; k < 5; ++k) {
    const double u = 0.5 * xi * (1.0 + gx[k]);
    const double u2 = u * u;
    const Eigen::Vector2d d = (6 * u2 - 6 * u) * p0 +
                              (3 * u2 - 4 * u + 1) * c * t0 +
                              (-6 * u2 + 6 * u) * p1 + (3 * u2 - 2 * u) * c * t1;
    acc += gw[k] * d.norm();
  }
  return 0.5 * xi * acc;
}

inline Eigen::Vector2d hermite_velocity(const Eigen::Vector2d& p0,
                                        const Eigen::Vector2d& t0,
                                        const Eigen::Vector2d& p1,
                                        const Eigen::Vector2d& t1, double xi) {
  const double c = (p1 - p0).norm();
  const double u2 = xi * xi;
  return (6 * u2 - 6 * xi) * p0 + (3 * u2 - 4 * xi + 1) * c * t0 +
         (-6 * u2 + 6 * xi) * p1 + (3 * u2 - 2 * xi) * c * t1;
}

// Solves arc_from_center(s) = target on the bracket [sa, sb] (safeguarded
// Newton; the chart arc is strictly increasing in s).
inline double invert_chart_arc(const SeriesChart& chart, double target,
                               double sa, double sb) {
  if (sa > sb) std::swap(sa, sb);
  double fa = chart.arc_from_center(sa) - target;
  double fb = chart.arc_from_center(sb) - target;
  if (fa > 0.0 || fb < 0.0)
    throw NumericalError("chart arc inversion started without a bracket");
  double s = 0.5 * (sa + sb);
  for (int it = 0; it < 200; ++it) {
    const double fs = chart.arc_from_center(s) - target;
    if (std::abs(fs) <= 1e-14 * (1.0 + std::abs(target))) return s;
    if (fs > 0.0)
      sb = s;
    else
      sa = s;
    const double speed = std::sqrt(std::max(chart.metric(s), 0.0));
    double next = speed > 0.0 ? s - fs / speed : s;
    if (!(next > sa && next < sb)) next = 0.5 * (sa + sb);
    if (sb - sa <= 1e-16 * (std::abs(sa) + std::abs(sb) + 1e-12)) return next;
    s = next;
  }
  return s;
}

}  // namespace detail

// Places exactly opt.n nodes on the closed curve F = 0, uniformly spaced in
// arclength.  Each declared singular point is snapped to a node of its own on
// every traversal through it; the segments between consecutive passages are
// filled with uniformly spaced interior nodes (largest-remainder
// apportionment, so every gap stays within a percent of the target spacing).
// Nodes falling inside a series chart's footprint are placed by inverting the
// chart's exact arclength map and carry their chart coordinate.
inline CurveMesh build_curve_mesh(const Polynomial& F,
                                  const Eigen::Vector2d& seed,
                                  const std::vector<SingularPassageSpec>& specs,
                                  const MeshOptions& opt) {
  if (opt.n < 8) throw ConfigError("mesh needs at least 8 nodes");
  ImplicitCurve C(F);
  const Eigen::Vector2d seed_p = C.project(seed);

  // coarse pass to learn the total length
  TraceOptions copt;
  copt.max_step =
      opt.coarse_step > 0.0 ? opt.coarse_step : 0.04 * std::max(1.0, seed_p.norm());
  TraceResult coarse = trace_closed_curve(F, seed_p, specs, copt);
  const double L0 = coarse.length;

  // fine pass at a step well below the node spacing
  const double h0 = L0 / opt.n;
  TraceOptions fopt;
  fopt.max_step = h0 / std::max(2.0, opt.fine_step_factor);
  fopt.max_points = static_cast<std::size_t>(64) * opt.n + 100000;
  TraceResult tr = trace_closed_curve(F, seed_p, specs, fopt);
  const double L = tr.length;

  CurveMesh mesh;
  mesh.curve = std::make_shared<ImplicitCurve>(C);
  mesh.length = L;
  mesh.h = L / opt.n;

  const int P = static_cast<int>(tr.passage_indices.size());
  const std::size_t npts = tr.pts.size();

  // ---- arc inversion on the fine trace ----
  auto locate = [&](double a) -> std::size_t {
    // last interval with arc[i] <= a (arc is strictly increasing)
    const auto it = std::upper_bound(tr.arc.begin(), tr.arc.end(), a);
    return static_cast<std::size_t>(it - tr.arc.begin()) - 1;
  };
  auto node_at_arc = [&](double a) -> CurveNode {
    a = detail::wrap_arc(a, L);
    const std::size_t i = locate(a);
    const TracePoint& A = tr.pts[i];
    const TracePoint& B = tr.pts[(i + 1) % npts];
    CurveNode nd;
    if (A.chart_id >= 0 && A.chart_id == B.chart_id) {
      // inside a series chart interval: invert the exact chart arclength
      const SeriesChart& chart = *specs[A.chart_id].chart;
      const double qa = chart.arc_from_center(A.chart_s);
      const double qb = chart.arc_from_center(B.chart_s);
      const double qt = qa + (qb > qa ? 1.0 : -1.0) * (a - tr.arc[i]);
      const double s =
          detail::invert_chart_arc(chart, qt, A.chart_s, B.chart_s);
      nd.p = detail::polish_on_line(C, chart, s);
      Eigen::Vector2d v = chart.velocity(s);
      v.normalize();
      nd.tangent = v.dot(A.tangent) >= 0.0 ? v : Eigen::Vector2d(-v);
      nd.kind = CurveNode::Kind::Smooth;
      nd.chart_id = A.chart_id;
      nd.chart_s = s;
      return nd;
    }
    const double seg = tr.gap(i);
    const double want = a - tr.arc[i];
    double xi = seg > 0 ? want / seg : 0.0;
    for (int it2 = 0; it2 < 3; ++it2) {
      const double have =
          detail::hermite_arc_partial(A.p, A.tangent, B.p, B.tangent, xi);
      const double speed =
          detail::hermite_velocity(A.p, A.tangent, B.p, B.tangent, xi).norm();
      if (speed <= 0.0) break;
      xi -= (have - want) / speed;
      xi = std::clamp(xi, 0.0, 1.0);
    }
    nd.p = C.project(hermite_point(A.p, A.tangent, B.p, B.tangent, xi));
    nd.tangent = C.tangent(nd.p);
    Eigen::Vector2d tdir =
        detail::hermite_velocity(A.p, A.tangent, B.p, B.tangent, xi);
    if (nd.tangent.dot(tdir) < 0.0) nd.tangent = -nd.tangent;
    nd.kind = CurveNode::Kind::Smooth;
    return nd;
  };

  // ---- assemble nodes in traversal order ----
  std::vector<CurveNode> nodes;
  std::vector<double> node_arc;  // trace-arc position of each node
  nodes.reserve(opt.n);
  node_arc.reserve(opt.n);
  std::vector<int> passage_node_pos(std::max(P, 1), -1);

  if (P == 0) {
    const double he = L / opt.n;
    for (int k = 0; k < opt.n; ++k) {
      nodes.push_back(node_at_arc(k * he));
      node_arc.push_back(k * he);
    }
  } else {
    if (opt.n < P + 4 * P)
      throw ConfigError("node budget too small for the singular structure");
    // segment arclengths between consecutive passages (the last wraps)
    std::vector<double> seg_start(P), seg_len(P);
    for (int e = 0; e < P; ++e) {
      seg_start[e] = tr.arc[tr.passage_indices[e]];
      if (e < P - 1)
        seg_len[e] = tr.arc[tr.passage_indices[e + 1]] - seg_start[e];
      else
        seg_len[e] = L - std::accumulate(seg_len.begin(), seg_len.end() - 1, 0.0);
      if (seg_len[e] <= 0.0)
        throw NumericalError("degenerate segment between singular passages");
    }
    // interior-node budget per segment, largest remainder
    const int interior_total = opt.n - P;
    std::vector<int> seg_n(P, 0);
    std::vector<double> frac(P);
    int assigned = 0;
    for (int e = 0; e < P; ++e) {
      const double q = interior_total * seg_len[e] / L;
      seg_n[e] = static_cast<int>(std::floor(q));
      frac[e] = q - seg_n[e];
      assigned += seg_n[e];
    }
    std::vector<int> order(P);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return frac[a] > frac[b]; });
    for (int k = 0; assigned < interior_total; ++k, ++assigned)
      ++seg_n[order[k % P]];

    for (int e = 0; e < P; ++e) {
      const TracePoint& tp = tr.pts[tr.passage_indices[e]];
      passage_node_pos[e] = static_cast<int>(nodes.size());
      CurveNode nd;
      nd.p = specs[tp.passage].location;
      nd.tangent = tp.tangent;
      nd.kind = specs[tp.passage].kind == SingularPassageSpec::Kind::Series
                    ? CurveNode::Kind::Cusp
                    : CurveNode::Kind::Crossing;
      nd.passage = tp.passage;
      if (nd.kind == CurveNode::Kind::Cusp) {
        nd.chart_id = tp.passage;
        nd.chart_s = 0.0;
      }
      nodes.push_back(nd);
      node_arc.push_back(detail::wrap_arc(seg_start[e], L));
      const double he = seg_len[e] / (seg_n[e] + 1);
      for (int k = 1; k <= seg_n[e]; ++k) {
        nodes.push_back(node_at_arc(seg_start[e] + k * he));
        node_arc.push_back(detail::wrap_arc(seg_start[e] + k * he, L));
      }
    }
  }
  if (static_cast<int>(nodes.size()) != opt.n)
    throw NumericalError("node budget accounting failed");

  // ---- rotate so node 0 is nearest the seed ----
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double d = (nodes[i].p - seed_p).norm();
    if (d < bd) {
      bd = d;
      best = i;
    }
  }
  std::rotate(nodes.begin(), nodes.begin() + best, nodes.end());
  std::rotate(node_arc.begin(), node_arc.begin() + best, node_arc.end());
  mesh.nodes = std::move(nodes);

  // ---- passage records ----
  for (int e = 0; e < P; ++e) {
    MeshPassage mp;
    const int spec = tr.pts[tr.passage_indices[e]].passage;
    mp.kind = specs[spec].kind;
    mp.location = specs[spec].location;
    mp.chart = specs[spec].chart;
    mp.spec = spec;
    mp.node = static_cast<int>(
        (passage_node_pos[e] - static_cast<int>(best) + opt.n) % opt.n);
    mesh.passages.push_back(mp);
  }
  std::sort(mesh.passages.begin(), mesh.passages.end(),
            [](const MeshPassage& a, const MeshPassage& b) { return a.node < b.node; });

  // ---- mirror symmetrization across even cusp charts ----
  // When the chart series is even, the curve is locally invariant under
  // flipping the power coordinate about the cusp.  The reconstruction rows
  // beside a cusp rely on the exact odd/even structure of their windows:
  // their moment matrices are close to singular, and the scheme stays
  // well-behaved only because node values and row targets degenerate
  // together under that symmetry.  Re-place the trailing side as exact
  // mirror images of the leading side so the structure holds to machine
  // precision rather than to the placement tolerance.
  for (const MeshPassage& mp : mesh.passages) {
    if (mp.kind != SingularPassageSpec::Kind::Series || !mp.chart) continue;
    const SeriesChart& chart = *mp.chart;
    bool even = true;
    for (int k = 1; k <= chart.series().order() && even; k += 2)
      if (chart.series().coeff(k) != 0.0) even = false;
    if (!even) continue;
    const int pv = chart.power_var();
    const double foot = chart.arc_from_center(chart.valid_radius());
    const int n = opt.n;
    const int kmax = std::min(static_cast<int>(std::floor(foot / mesh.h)) + 1,
                              (n - 1) / 2);
    for (int k = 1; k <= kmax; ++k) {
      CurveNode& plus = mesh.nodes[(mp.node + k) % n];
      CurveNode& minus = mesh.nodes[(mp.node - k + n) % n];
      if (plus.kind != CurveNode::Kind::Smooth ||
          minus.kind != CurveNode::Kind::Smooth)
        break;
      Eigen::Vector2d q = plus.p;
      q[pv] = 2.0 * mp.location[pv] - q[pv];
      // stop where the two sides are not at mirrored arc offsets (multiple
      // passages can make the segment subdivisions differ side to side)
      if ((q - minus.p).norm() > 0.1 * mesh.h) break;
      minus.p = q;
      Eigen::Vector2d t = plus.tangent;
      t[pv] = -t[pv];
      minus.tangent = minus.tangent.dot(t) >= 0.0 ? t : Eigen::Vector2d(-t);
    }
  }

  // ---- chart annotation for nodes inside a series chart's footprint ----
  // The chart coordinate follows from the power coordinate alone, so any
  // node close enough to the cusp can be annotated after the fact; the
  // position cross-check skips nodes where the truncated series has decayed
  // past full accuracy (their gaps fall back to the Hermite arc, which is
  // accurate away from the cusp).
  for (std::size_t sid = 0; sid < specs.size(); ++sid) {
    const SingularPassageSpec& ps = specs[sid];
    if (ps.kind != SingularPassageSpec::Kind::Series || !ps.chart) continue;
    const SeriesChart& chart = *ps.chart;
    for (CurveNode& nd : mesh.nodes) {
      if (nd.chart_id >= 0 || nd.kind != CurveNode::Kind::Smooth) continue;
      const double d = (nd.p - ps.location)[chart.power_var()];
      const double s = detail::signed_root(d, chart.power());
      if (std::abs(s) > 0.6 * chart.valid_radius()) continue;
      if ((chart.position(s) - nd.p).norm() > 1e-8 * std::max(1.0, nd.p.norm()))
        continue;
      nd.chart_id = static_cast<int>(sid);
      nd.chart_s = s;
    }
  }

  // ---- gaps: consecutive differences of the trace-arc positions ----
  // (chart-exact through the singular passages, Hermite-sum elsewhere)
  mesh.gaps.assign(mesh.nodes.size(), 0.0);
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const double next = node_arc[(i + 1) % mesh.size()];
    double d = next - node_arc[i];
    if (d <= 0.0) d += L;  // the one cyclic wrap in the rotated order
    mesh.gaps[i] = d;
  }

  // ---- uniformity contract: 1% of h, relaxed to 5% beside singular nodes ----
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const CurveNode& a = mesh.nodes[i];
    const CurveNode& b = mesh.nodes[(i + 1) % mesh.size()];
    const bool near_sing =
        a.kind != CurveNode::Kind::Smooth || b.kind != CurveNode::Kind::Smooth;
    const double tol = near_sing ? 0.05 : 0.01;
    if (std::abs(mesh.gaps[i] - mesh.h) > tol * mesh.h)
      throw NumericalError("mesh gap deviates from the uniform spacing");
  }
  return mesh;
}

}  // namespace algpde
