#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "algpde/curve_mesh.hpp"
#include "helpers.hpp"

using namespace algpde;

namespace {

Polynomial poly(const std::string& s) {
  return Polynomial::parse(s, {"x", "y"});
}

void check_nodes_on_curve(const Polynomial& F, const CurveMesh& mesh,
                          double tol = 1e-10) {
  ImplicitCurve C(F);
  for (const auto& nd : mesh.nodes) {
    REQUIRE(std::abs(C.f(nd.p)) <= tol * C.value_scale(nd.p));
    REQUIRE(nd.tangent.norm() == Catch::Approx(1.0).epsilon(1e-12));
  }
}

}  // namespace

TEST_CASE("uniform mesh on the unit circle") {
  const Polynomial F = poly("x^2 + y^2 - 1");
  MeshOptions opt;
  opt.n = 64;
  CurveMesh mesh = build_curve_mesh(F, {1.0, 0.0}, {}, opt);

  REQUIRE(mesh.size() == 64);
  REQUIRE(mesh.passages.empty());
  REQUIRE(mesh.length == Catch::Approx(2.0 * M_PI).epsilon(1e-6));
  REQUIRE(mesh.h == Catch::Approx(2.0 * M_PI / 64).epsilon(1e-6));
  check_nodes_on_curve(F, mesh, 1e-12);

  // anchored at the seed, counter-clockwise
  REQUIRE((mesh.nodes[0].p - Eigen::Vector2d(1.0, 0.0)).norm() < 1e-10);
  REQUIRE(mesh.nodes[0].tangent.isApprox(Eigen::Vector2d(0.0, 1.0), 1e-10));
  REQUIRE(mesh.nodes[1].p.y() > 0.0);

  double gsum = 0.0;
  for (double g : mesh.gaps) {
    REQUIRE(g == Catch::Approx(mesh.h).epsilon(1e-3));
    gsum += g;
  }
  REQUIRE(gsum == Catch::Approx(mesh.length).epsilon(1e-6));
  for (const auto& nd : mesh.nodes) REQUIRE(nd.kind == CurveNode::Kind::Smooth);
}

TEST_CASE("stiff ellipse mesh is arclength-uniform") {
  const Polynomial F = poly("x^2 + 50*y^2 - 1");
  MeshOptions opt;
  opt.n = 100;
  CurveMesh mesh = build_curve_mesh(F, {1.0, 0.0}, {}, opt);

  REQUIRE(mesh.size() == 100);
  check_nodes_on_curve(F, mesh, 1e-11);
  for (double g : mesh.gaps) REQUIRE(g == Catch::Approx(mesh.h).epsilon(0.01));
}

TEST_CASE("lemniscate mesh: exact budget and two distinct crossing nodes") {
  const Polynomial F = poly("x^4 - x^2 + y^2");
  auto sing = find_singular_points(F, {-2.0, 2.0, -2.0, 2.0});
  REQUIRE(sing.size() == 1);
  auto bt = branch_tangents(F, sing[0]);

  SingularPassageSpec ps;
  ps.location = sing[0];
  ps.kind = SingularPassageSpec::Kind::Crossing;
  for (const auto& b : bt) ps.tangents.push_back(b.dir);

  MeshOptions opt;
  opt.n = 160;
  CurveMesh mesh = build_curve_mesh(F, {1.0, 0.0}, {ps}, opt);

  REQUIRE(mesh.size() == 160);
  check_nodes_on_curve(F, mesh, 1e-10);

  // the traversal visits the origin twice: two nodes, same spot, different
  // branch tangents
  REQUIRE(mesh.passages.size() == 2);
  REQUIRE(mesh.passages[0].node == 40);
  REQUIRE(mesh.passages[1].node == 120);
  const CurveNode& c0 = mesh.nodes[40];
  const CurveNode& c1 = mesh.nodes[120];
  REQUIRE(c0.kind == CurveNode::Kind::Crossing);
  REQUIRE(c1.kind == CurveNode::Kind::Crossing);
  REQUIRE(c0.p.norm() == 0.0);
  REQUIRE(c1.p.norm() == 0.0);
  REQUIRE(std::abs(c0.tangent.dot(c1.tangent)) < 1e-9);

  // by symmetry the seed (1, 0) is itself a node
  REQUIRE((mesh.nodes[0].p - Eigen::Vector2d(1.0, 0.0)).norm() < 1e-8);

  // arc-uniform across the crossings: every gap is the uniform one
  for (double g : mesh.gaps) REQUIRE(g == Catch::Approx(mesh.h).epsilon(0.01));
}

TEST_CASE("cusped quartic mesh: singular point snapped, spacing uniform") {
  const Polynomial F = poly("(x^2 + y^2)^2 + 4*x*(x^2 + y^2) - 4*y^2");
  auto chart = std::make_shared<SeriesChart>(
      fit_series_chart(F, {0.0, 0.0}, /*power_var=*/1, /*m=*/3, /*order=*/24));

  SingularPassageSpec ps;
  ps.location = {0.0, 0.0};
  ps.kind = SingularPassageSpec::Kind::Series;
  ps.chart = chart;

  MeshOptions opt;
  opt.n = 80;
  CurveMesh mesh = build_curve_mesh(F, {-4.0, 0.0}, {ps}, opt);

  REQUIRE(mesh.size() == 80);
  check_nodes_on_curve(F, mesh, 1e-9);
  REQUIRE(mesh.length == Catch::Approx(16.0).epsilon(1e-5));

  REQUIRE(mesh.passages.size() == 1);
  const MeshPassage& mp = mesh.passages[0];
  REQUIRE(mp.kind == SingularPassageSpec::Kind::Series);
  REQUIRE(mp.spec == 0);

  // by symmetry the seed (-4, 0) is a node and the cusp sits opposite it
  REQUIRE((mesh.nodes[0].p - Eigen::Vector2d(-4.0, 0.0)).norm() < 1e-7);
  REQUIRE(mp.node == 40);

  const int ci = mp.node;
  const CurveNode& cusp = mesh.nodes[ci];
  REQUIRE(cusp.kind == CurveNode::Kind::Cusp);
  REQUIRE(cusp.p.norm() == 0.0);
  REQUIRE(std::abs(cusp.tangent.y()) < 1e-10);  // branch leaves along +/- x

  // arclength-uniform right up to the cusp
  for (double g : mesh.gaps) REQUIRE(g == Catch::Approx(mesh.h).epsilon(1e-4));
  double gsum = 0.0;
  for (double g : mesh.gaps) gsum += g;
  REQUIRE(gsum == Catch::Approx(mesh.length).epsilon(1e-6));

  // neighbors of the cusp carry chart coordinates with opposite signs
  const CurveNode& before = mesh.nodes[(ci - 1 + 80) % 80];
  const CurveNode& after = mesh.nodes[(ci + 1) % 80];
  REQUIRE(before.chart_id == 0);
  REQUIRE(after.chart_id == 0);
  REQUIRE(before.chart_s * after.chart_s < 0.0);
  REQUIRE(std::abs(std::abs(before.chart_s) - std::abs(after.chart_s)) < 1e-6);

  // the chart coordinate reproduces the arclength offset from the cusp
  const double q1 = std::abs(chart->arc_from_center(after.chart_s));
  REQUIRE(q1 == Catch::Approx(mesh.h).epsilon(1e-5));
}

TEST_CASE("mesh validates its budget and spacing contract") {
  const Polynomial F = poly("(x^2 + y^2)^2 + 4*x*(x^2 + y^2) - 4*y^2");
  auto chart = std::make_shared<SeriesChart>(
      fit_series_chart(F, {0.0, 0.0}, 1, 3, 24));
  SingularPassageSpec ps;
  ps.location = {0.0, 0.0};
  ps.kind = SingularPassageSpec::Kind::Series;
  ps.chart = chart;

  MeshOptions tiny;
  tiny.n = 4;
  REQUIRE_THROWS_AS(build_curve_mesh(F, {-4.0, 0.0}, {}, tiny), ConfigError);

  // a coarse mesh still snaps the cusp and keeps the spacing uniform
  MeshOptions coarse;
  coarse.n = 20;
  CurveMesh mesh = build_curve_mesh(F, {-4.0, 0.0}, {ps}, coarse);
  REQUIRE(mesh.size() == 20);
  REQUIRE(mesh.passages.size() == 1);
  REQUIRE(mesh.nodes[mesh.passages[0].node].kind == CurveNode::Kind::Cusp);
  for (double g : mesh.gaps) REQUIRE(g == Catch::Approx(mesh.h).epsilon(0.05));
}
