#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "algpde/polynomial.hpp"
#include "algpde/singularity.hpp"
#include "algpde/stencil.hpp"
#include "helpers.hpp"

using algpde::branch_tangents;
using algpde::find_singular_points;
using algpde::fit_series_chart;
using algpde::Polynomial;
using algpde::real_poly_roots;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
const std::vector<std::string> XY = {"x", "y"};

Polynomial lemniscate() { return Polynomial::parse("x^4 - x^2 + y^2", XY); }
Polynomial cardioid() {
  return Polynomial::parse("(x^2 + y^2)^2 + 4*x*(x^2 + y^2) - 4*y^2", XY);
}
}  // namespace

TEST_CASE("real roots of a factored cubic") {
  // (x - 1)(x + 2)(x - 0.5) = x^3 + 0.5 x^2 - 2.5 x + 1
  auto r = real_poly_roots({1.0, -2.5, 0.5, 1.0});
  REQUIRE(r.size() == 3);
  REQUIRE_THAT(r[0], WithinAbs(-2.0, 1e-10));
  REQUIRE_THAT(r[1], WithinAbs(0.5, 1e-10));
  REQUIRE_THAT(r[2], WithinAbs(1.0, 1e-10));
  REQUIRE(real_poly_roots({1.0, 0.0, 1.0}).empty());  // x^2 + 1
}

TEST_CASE("singular point search on classic curves") {
  auto lem = find_singular_points(lemniscate(), {-1.3, 1.3, -0.6, 0.6});
  REQUIRE(lem.size() == 1);
  REQUIRE_THAT(lem[0].norm(), WithinAbs(0.0, 1e-10));

  auto card = find_singular_points(cardioid(), {-4.5, 1.0, -3.5, 3.5});
  REQUIRE(card.size() == 1);
  REQUIRE_THAT(card[0].norm(), WithinAbs(0.0, 1e-10));

  auto circ = find_singular_points(Polynomial::parse("x^2 + y^2 - 1", XY),
                                   {-1.5, 1.5, -1.5, 1.5});
  REQUIRE(circ.empty());
}

TEST_CASE("seeded search refines a perturbed singular point estimate") {
  std::vector<Eigen::Vector2d> seeds = {{0.013, -0.02}};
  auto pts = find_singular_points(lemniscate(), {-1.3, 1.3, -0.6, 0.6}, 4, seeds);
  REQUIRE(pts.size() == 1);
  REQUIRE_THAT(pts[0].norm(), WithinAbs(0.0, 1e-10));
}

TEST_CASE("branch tangents of a transversal crossing") {
  auto tans = branch_tangents(lemniscate(), {0.0, 0.0});
  REQUIRE(tans.size() == 2);
  const double inv = 1.0 / std::sqrt(2.0);
  REQUIRE(tans[0].multiplicity == 1);
  REQUIRE(tans[1].multiplicity == 1);
  REQUIRE_THAT(tans[0].dir.x(), WithinAbs(inv, 1e-12));
  REQUIRE_THAT(tans[0].dir.y(), WithinAbs(inv, 1e-12));
  REQUIRE_THAT(tans[1].dir.x(), WithinAbs(-inv, 1e-12));
  REQUIRE_THAT(tans[1].dir.y(), WithinAbs(inv, 1e-12));
}

TEST_CASE("branch tangent of a cusp has multiplicity two") {
  auto tans = branch_tangents(cardioid(), {0.0, 0.0});
  REQUIRE(tans.size() == 1);
  REQUIRE(tans[0].multiplicity == 2);
  REQUIRE_THAT(tans[0].dir.x(), WithinAbs(1.0, 1e-12));
  REQUIRE_THAT(tans[0].dir.y(), WithinAbs(0.0, 1e-12));
}

TEST_CASE("tangent at a smooth point falls out of the same machinery") {
  auto tans = branch_tangents(Polynomial::parse("x^2 + y^2 - 1", XY), {1.0, 0.0});
  REQUIRE(tans.size() == 1);
  REQUIRE(tans[0].multiplicity == 1);
  REQUIRE_THAT(std::abs(tans[0].dir.y()), WithinAbs(1.0, 1e-12));
}

TEST_CASE("chart for the semicubical cusp is exact") {
  auto chart = fit_series_chart(Polynomial::parse("y^2 - x^3", XY), {0.0, 0.0},
                                /*power_var=*/1, /*m=*/3, /*order=*/20);
  REQUIRE_THAT(chart.series().coeff(2), WithinAbs(1.0, 1e-13));
  for (int k = 0; k < 20; ++k)
    if (k != 2) REQUIRE_THAT(chart.series().coeff(k), WithinAbs(0.0, 1e-12));
  REQUIRE_THAT(chart.g2(), WithinRel(4.0, 1e-12));
  REQUIRE_THAT(chart.g4(), WithinRel(9.0, 1e-12));
  REQUIRE(chart.valid_radius() > 1e50);

  // position lands on the curve, velocity is tangent
  for (double s : {0.3, -0.4, 0.8}) {
    auto p = chart.position(s);
    REQUIRE_THAT(p.y() * p.y() - std::pow(p.x(), 3), WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(chart.metric(s),
                 WithinRel(4.0 * s * s + 9.0 * std::pow(s, 4), 1e-12));
  }
}

TEST_CASE("signed chart arclength matches the closed form") {
  auto chart = fit_series_chart(Polynomial::parse("y^2 - x^3", XY), {0.0, 0.0},
                                1, 3, 20);
  auto exact = [](double s) {
    const double v = std::pow(4.0 + 9.0 * s * s, 1.5);
    return (v - 8.0) / 27.0 * (s < 0 ? -1.0 : 1.0);
  };
  for (double s : {0.5, 1.0, -0.5, -0.25, 0.05})
    REQUIRE_THAT(chart.arc_from_center(s), WithinRel(exact(s), 1e-12));
}

TEST_CASE("cusp limit row reproduces the Laplacian limit") {
  // On y^2 = x^3 with u = x the Laplacian limit at the cusp is -9/8.
  auto chart = fit_series_chart(Polynomial::parse("y^2 - x^3", XY), {0.0, 0.0},
                                1, 3, 20);
  const int Z = 5;
  const double ds = 0.05;
  std::vector<double> offs, u;
  for (int k = -Z; k <= Z; ++k) {
    offs.push_back(k * ds);
    u.push_back(chart.position(k * ds).x());
  }
  auto w2 = algpde::derivative_weights(offs, 2);
  auto w4 = algpde::derivative_weights(offs, 4);
  double d2 = 0.0, d4 = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d2 += w2[i] * u[i];
    d4 += w4[i] * u[i];
  }
  const double lap0 =
      d4 / (3.0 * chart.g2()) - chart.g4() / (chart.g2() * chart.g2()) * d2;
  REQUIRE_THAT(lap0, WithinAbs(-9.0 / 8.0, 1e-8));

  // independent oracle: evaluate the interior Laplacian close to the cusp
  const double s = 1e-3;
  const double g = 4.0 * s * s + 9.0 * std::pow(s, 4);
  const double gp = 8.0 * s + 36.0 * std::pow(s, 3);
  const double lap_near = 2.0 / g - gp / (2.0 * g * g) * 2.0 * s;
  REQUIRE_THAT(lap_near, WithinAbs(-9.0 / 8.0, 1e-5));
}

TEST_CASE("cardioid cusp chart reproduces the lifted series") {
  auto chart = fit_series_chart(cardioid(), {0.0, 0.0}, 1, 3, 58);
  REQUIRE_THAT(chart.series().coeff(2), WithinAbs(1.0, 1e-12));
  REQUIRE_THAT(chart.series().coeff(4), WithinAbs(-5.0 / 12.0, 1e-12));
  REQUIRE_THAT(chart.series().coeff(6), WithinAbs(-1.0 / 16.0, 1e-12));
  REQUIRE_THAT(chart.series().coeff(8), WithinAbs(-91.0 / 5184.0, 1e-12));
  for (int k = 1; k < 58; k += 2)
    REQUIRE_THAT(chart.series().coeff(k), WithinAbs(0.0, 1e-11));

  REQUIRE_THAT(chart.g2(), WithinRel(4.0, 1e-11));
  REQUIRE_THAT(chart.g4(), WithinRel(7.0 / 3.0, 1e-10));

  for (double s : {0.1, -0.3, 0.5, -0.7}) {
    auto p = chart.position(s);
    const double xy[2] = {p.x(), p.y()};
    REQUIRE_THAT(cardioid().evaluate(xy), WithinAbs(0.0, 1e-8));
    REQUIRE_THAT(p.y(), WithinRel(std::pow(s, 3), 1e-14));
  }

  // x as a function of y branches at the horizontal tangent y = 3 sqrt(3)/2,
  // so the true radius is (3 sqrt(3)/2)^(1/3) = 1.375; the tail-ratio
  // estimate lands slightly above it
  REQUIRE(chart.valid_radius() > 1.25);
  REQUIRE(chart.valid_radius() < 1.55);
}

TEST_CASE("chart fit fails cleanly for an incompatible power") {
  REQUIRE_THROWS_AS(
      fit_series_chart(Polynomial::parse("y^2 - x^3", XY), {0.0, 0.0}, 1, 2, 20),
      algpde::NumericalError);
}
