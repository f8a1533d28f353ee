#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <set>

#include "algpde/surface_mesh.hpp"

using namespace algpde;

namespace {

Polynomial poly3(const std::string& s) {
  return Polynomial::parse(s, {"x", "y", "z"});
}

Polynomial sphere_poly() { return poly3("x^2 + y^2 + z^2 - 1"); }

Polynomial ellipsoid_poly(double a) {
  Polynomial F = poly3("x^2 - 1");
  const Polynomial yz = poly3("y^2 + z^2");
  return F + yz * Polynomial::constant(a, {"x", "y", "z"});
}

Polynomial horn_torus_poly() {
  return poly3("(x^2 + y^2 + z^2)^2 - 4*x^2 - 4*y^2");
}

struct MeshStats {
  int smooth = 0;
  double nn_min = 1e300;
  double nn_max = 0.0;
};

MeshStats nn_stats(const SurfaceMesh& mesh) {
  MeshStats st;
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    if (mesh.nodes[i].singular) continue;
    ++st.smooth;
    const double d =
        (mesh.nodes[mesh.neighbors[i][0]].p - mesh.nodes[i].p).norm();
    st.nn_min = std::min(st.nn_min, d);
    st.nn_max = std::max(st.nn_max, d);
  }
  return st;
}

}  // namespace

TEST_CASE("implicit surface derivatives and projection") {
  ImplicitSurface S(ellipsoid_poly(10.0));
  const Eigen::Vector3d p(0.2, 0.1, -0.25);

  // gradient and Hessian against central differences
  const double h = 1e-6;
  Eigen::Vector3d gfd;
  for (int i = 0; i < 3; ++i) {
    Eigen::Vector3d e = Eigen::Vector3d::Zero();
    e[i] = h;
    gfd[i] = (S.value(p + e) - S.value(p - e)) / (2 * h);
  }
  REQUIRE((S.grad(p) - gfd).norm() < 1e-6 * (1.0 + gfd.norm()));
  Eigen::Matrix3d Hfd;
  for (int j = 0; j < 3; ++j) {
    Eigen::Vector3d e = Eigen::Vector3d::Zero();
    e[j] = h;
    Hfd.col(j) = (S.grad(p + e) - S.grad(p - e)) / (2 * h);
  }
  REQUIRE((S.hess(p) - Hfd).norm() < 1e-6 * (1.0 + Hfd.norm()));

  // projection lands on the zero set and stays near the start
  const Eigen::Vector3d q = S.project(Eigen::Vector3d(0.9, 0.2, 0.1));
  REQUIRE(std::abs(S.value(q)) < 1e-12 * S.value_scale(q));
  REQUIRE((q - Eigen::Vector3d(0.9, 0.2, 0.1)).norm() < 0.6);

  // projection from a critical point of F off the surface must fail loudly:
  // at (1,1,0) the horn-torus gradient vanishes exactly while F = -4
  REQUIRE_THROWS_AS(ImplicitSurface(horn_torus_poly())
                        .project(Eigen::Vector3d(1.0, 1.0, 0.0)),
                    NumericalError);
}

TEST_CASE("tangent bases are orthonormal, gradient-orthogonal, deterministic") {
  // revolution-symmetric ellipsoid: at (1,0,0) the gradient is along x, so
  // the basis must span {y, z}
  ImplicitSurface S(ellipsoid_poly(10.0));
  const auto [w1, w2] = S.tangent_basis(Eigen::Vector3d(1.0, 0.0, 0.0));
  REQUIRE(std::abs(w1.x()) < 1e-14);
  REQUIRE(std::abs(w2.x()) < 1e-14);
  REQUIRE(std::abs(w1.dot(w2)) < 1e-14);
  REQUIRE(w1.norm() == Catch::Approx(1.0).epsilon(1e-13));
  REQUIRE(w2.norm() == Catch::Approx(1.0).epsilon(1e-13));

  // generic points: orthonormality and orthogonality to the gradient
  ImplicitSurface Sp(sphere_poly());
  for (const Eigen::Vector3d& raw :
       {Eigen::Vector3d(0.3, -0.8, 0.5), Eigen::Vector3d(0.0, 0.0, -1.0),
        Eigen::Vector3d(-0.7, 0.1, 0.1)}) {
    const Eigen::Vector3d p = Sp.project(raw);
    const auto [u1, u2] = Sp.tangent_basis(p);
    REQUIRE(std::abs(u1.dot(u2)) < 1e-12);
    REQUIRE(u1.norm() == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(u2.norm() == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(std::abs(u1.dot(Sp.grad(p))) < 1e-10);
    REQUIRE(std::abs(u2.dot(Sp.grad(p))) < 1e-10);
    // deterministic: a second call gives bit-identical vectors
    const auto [v1, v2] = Sp.tangent_basis(p);
    REQUIRE((u1 - v1).norm() == 0.0);
    REQUIRE((u2 - v2).norm() == 0.0);
  }

  // basis at the pinch point of the horn torus must be refused
  REQUIRE_THROWS_AS(ImplicitSurface(horn_torus_poly())
                        .tangent_basis(Eigen::Vector3d::Zero()),
                    NumericalError);
}

TEST_CASE("sphere sampling is uniform at the recorded statistics") {
  SurfaceMesh mesh = build_surface_mesh(sphere_poly(), ellipsoid_generator(1.0),
                                        20);
  const MeshStats st = nn_stats(mesh);
  REQUIRE(st.smooth >= 380);
  REQUIRE(st.smooth <= 420);
  REQUIRE(st.nn_max / st.nn_min <= 1.8);

  ImplicitSurface S(sphere_poly());
  for (const auto& nd : mesh.nodes) {
    REQUIRE(std::abs(S.value(nd.p)) < 1e-10 * S.value_scale(nd.p));
    REQUIRE(std::abs(nd.w1.dot(nd.w2)) < 1e-12);
    REQUIRE(nd.w1.norm() == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(nd.w2.norm() == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(std::abs(nd.w1.dot(S.grad(nd.p))) < 1e-8);
    REQUIRE(std::abs(nd.w2.dot(S.grad(nd.p))) < 1e-8);
  }
}

TEST_CASE("neighbor lists are mutual enough and well spread") {
  SurfaceMesh mesh = build_surface_mesh(sphere_poly(), ellipsoid_generator(1.0),
                                        20);
  // every node appears in at least 4 of its neighbors' lists
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    int mutual = 0;
    for (int j : mesh.neighbors[i]) {
      const auto& back = mesh.neighbors[j];
      if (std::find(back.begin(), back.end(), static_cast<int>(i)) !=
          back.end())
        ++mutual;
    }
    REQUIRE(mutual >= 4);
  }
  // stencil coordinates: center excluded, |t| bounded, sectors covered
  for (std::size_t i = 0; i < mesh.size(); i += 7) {
    const auto st = stencil_local_coords(mesh, static_cast<int>(i));
    REQUIRE(st.size() == 8);
    for (const auto& [j, t] : st) {
      REQUIRE(j != static_cast<int>(i));
      REQUIRE(t.norm() <= 2.0 * mesh.spacing);
      // the coordinates really are the tangent-plane projection
      const Eigen::Vector3d d = mesh.nodes[j].p - mesh.nodes[i].p;
      REQUIRE(t.x() == Catch::Approx(d.dot(mesh.nodes[i].w1)).margin(1e-14));
      REQUIRE(t.y() == Catch::Approx(d.dot(mesh.nodes[i].w2)).margin(1e-14));
    }
  }
}

TEST_CASE("ellipsoid meshes scale with the aspect parameter") {
  for (double a : {1.0, 10.0, 50.0}) {
    SurfaceMesh mesh = build_surface_mesh(ellipsoid_poly(a),
                                          ellipsoid_generator(a), 20);
    const MeshStats st = nn_stats(mesh);
    REQUIRE(std::abs(st.smooth - 400) <= 40);
    REQUIRE(st.nn_max / st.nn_min <= 3.0);
    ImplicitSurface S(ellipsoid_poly(a));
    for (const auto& nd : mesh.nodes)
      REQUIRE(std::abs(S.value(nd.p)) < 1e-10 * S.value_scale(nd.p));
  }
}

TEST_CASE("projection parameterization has identity metric at the origin") {
  // central content of the tangent-plane scheme: the pullback metric of
  // X(t) = project(p + t1 w1 + t2 w2) satisfies G(0) = I and dG(0) = 0, so
  // the surface Laplacian at p is the flat Laplacian in t-coordinates.
  ImplicitSurface S(ellipsoid_poly(10.0));
  for (const Eigen::Vector3d& raw :
       {Eigen::Vector3d(1.0, 0.0, 0.0), Eigen::Vector3d(0.4, 0.2, 0.1),
        Eigen::Vector3d(-0.2, -0.25, 0.1)}) {
    const Eigen::Vector3d p = S.project(raw);
    const auto [w1, w2] = S.tangent_basis(p);
    auto X = [&](double t1, double t2) {
      return S.project(p + t1 * w1 + t2 * w2);
    };
    const double d = 2e-6;
    auto metric = [&](double t1, double t2) {
      const Eigen::Vector3d x1 = (X(t1 + d, t2) - X(t1 - d, t2)) / (2 * d);
      const Eigen::Vector3d x2 = (X(t1, t2 + d) - X(t1, t2 - d)) / (2 * d);
      Eigen::Matrix2d G;
      G << x1.dot(x1), x1.dot(x2), x2.dot(x1), x2.dot(x2);
      return G;
    };
    REQUIRE((metric(0, 0) - Eigen::Matrix2d::Identity()).norm() < 1e-8);
    const double step = 1e-3;
    REQUIRE((metric(step, 0) - metric(-step, 0)).norm() / (2 * step) < 1e-4);
    REQUIRE((metric(0, step) - metric(0, -step)).norm() / (2 * step) < 1e-4);
  }
}

TEST_CASE("horn torus mesh isolates the pinch point") {
  SurfaceMesh mesh = build_surface_mesh(horn_torus_poly(),
                                        horn_torus_generator(), 40,
                                        {horn_torus_chart()});
  // exactly one singular node, exactly at the origin, stored last
  REQUIRE(mesh.nodes.back().singular);
  REQUIRE(mesh.nodes.back().p.norm() == 0.0);
  int singular_count = 0;
  for (const auto& nd : mesh.nodes) singular_count += nd.singular ? 1 : 0;
  REQUIRE(singular_count == 1);

  // no smooth node intrudes into the pinch neighborhood
  double dmin = 1e300;
  for (const auto& nd : mesh.nodes)
    if (!nd.singular) dmin = std::min(dmin, nd.p.norm());
  REQUIRE(dmin > 0.45 * mesh.spacing);

  // the singular node never appears in a neighbor list
  const int sing = static_cast<int>(mesh.size()) - 1;
  for (std::size_t i = 0; i < mesh.size(); ++i)
    for (int j : mesh.neighbors[i]) REQUIRE(j != sing);

  // the singular node's own stencil straddles the pinch: both signs of the
  // meridian coordinate are present
  int plus = 0, minus = 0;
  for (int j : mesh.neighbors[sing]) {
    const Eigen::Vector2d t = mesh.charts[0].coords(mesh.nodes[j].p);
    (t.x() > 0 ? plus : minus)++;
  }
  REQUIRE(plus >= 2);
  REQUIRE(minus >= 2);
}

TEST_CASE("horn torus chart parameterizes the surface exactly") {
  const SurfaceSingularChart ch = horn_torus_chart();
  ImplicitSurface S(horn_torus_poly());

  // on-surface within the valid disk, and coords() inverts position()
  for (double t1 : {-1.1, -0.62, -0.2, 0.15, 0.8, 1.19}) {
    for (double t2 : {0.0, 1.1, 2.9, -2.2}) {
      const Eigen::Vector3d p = ch.position(t1, t2);
      REQUIRE(std::abs(S.value(p)) < 1e-8 * S.value_scale(p));
      const Eigen::Vector2d t = ch.coords(p);
      REQUIRE(t.x() == Catch::Approx(t1).margin(1e-12));
      REQUIRE(std::remainder(t.y() - t2, 2 * M_PI) ==
              Catch::Approx(0.0).margin(1e-12));
    }
  }

  // chart derivatives against central differences (first via position,
  // second via the first derivatives to keep roundoff at bay)
  const double h = 1e-6;
  for (double t1 : {-0.9, 0.35, 1.0}) {
    const double t2 = 0.8;
    const Eigen::Vector3d d1fd =
        (ch.position(t1 + h, t2) - ch.position(t1 - h, t2)) / (2 * h);
    const Eigen::Vector3d d2fd =
        (ch.position(t1, t2 + h) - ch.position(t1, t2 - h)) / (2 * h);
    REQUIRE((ch.d1(t1, t2) - d1fd).norm() < 1e-8);
    REQUIRE((ch.d2(t1, t2) - d2fd).norm() < 1e-8);
    REQUIRE((ch.d11(t1, t2) -
             (ch.d1(t1 + h, t2) - ch.d1(t1 - h, t2)) / (2 * h))
                .norm() < 1e-7);
    REQUIRE((ch.d12(t1, t2) -
             (ch.d1(t1, t2 + h) - ch.d1(t1, t2 - h)) / (2 * h))
                .norm() < 1e-8);
    REQUIRE((ch.d22(t1, t2) -
             (ch.d2(t1, t2 + h) - ch.d2(t1, t2 - h)) / (2 * h))
                .norm() < 1e-8);
  }

  // metric structure at the pinch: G is diagonal with G11 -> 2, G22 ~ t1^4
  const Eigen::Matrix2d G0 = ch.metric(1e-8, 0.3);
  REQUIRE(G0(0, 0) == Catch::Approx(2.0).epsilon(1e-10));
  REQUIRE(std::abs(G0(0, 1)) < 1e-14);
  const Eigen::Matrix2d G = ch.metric(0.5, 0.3);
  REQUIRE(G(1, 1) == Catch::Approx(std::pow(0.5, 4)).epsilon(1e-12));
  REQUIRE(std::abs(G(0, 1)) < 1e-14);
}

TEST_CASE("generated points colliding with a singular point are rejected") {
  // declare a fake "singular point" right on a sphere sampling site: the
  // builder must refuse the mesh rather than duplicate the node
  SurfaceMesh probe = build_surface_mesh(sphere_poly(),
                                         ellipsoid_generator(1.0), 12);
  SurfaceSingularChart fake;
  fake.location = probe.nodes[probe.size() / 2].p;
  fake.position = [](double, double) { return Eigen::Vector3d::Zero(); };
  fake.valid_radius = 0.1;
  REQUIRE_THROWS_AS(build_surface_mesh(sphere_poly(), ellipsoid_generator(1.0),
                                       12, {fake}),
                    NumericalError);
}
