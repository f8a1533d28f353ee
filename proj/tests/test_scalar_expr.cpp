#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "algpde/scalar_expr.hpp"
#include "helpers.hpp"

using algpde::NumericalError;
using algpde::ParseError;
using algpde::ScalarExpr;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

static const std::vector<std::string> XY = {"x", "y"};

TEST_CASE("pi times x") {
  ScalarExpr e = ScalarExpr::parse("pi * x", XY);
  REQUIRE_THAT(e.evaluate({1.0, 0.0}), WithinRel(3.14159265358979323846, 1e-15));
}

TEST_CASE("reaction coefficient with a rational correction term") {
  ScalarExpr c = ScalarExpr::parse(
      "pi - (4*x^2 + 4*y^2 - 3)/(8*x^2*y^2 + 16*y^4 - 3*x^2 - 17*y^2 + 4)", XY);
  // at (1, 0) the correction is 1/1
  REQUIRE_THAT(c.evaluate({1.0, 0.0}), WithinRel(3.14159265358979323846 - 1.0, 1e-14));
  // at (0, 0) it is -3/4
  REQUIRE_THAT(c.evaluate({0.0, 0.0}),
               WithinRel(3.14159265358979323846 + 0.75, 1e-14));
}

TEST_CASE("rational source term at a base point") {
  ScalarExpr f = ScalarExpr::parse(
      "(3607*x^2 - 224*x*y^2 + 7662*x - 53*y^2 - 973)/"
      "(196*x^2 + 616*x + 196*y^2 + 1112)",
      XY);
  REQUIRE_THAT(f.evaluate({0.0, 0.0}), WithinRel(-973.0 / 1112.0, 1e-15));
  REQUIRE_THAT(f.evaluate({0.0, 0.0}), WithinAbs(-0.875, 1e-15));
}

TEST_CASE("trigonometric and square root evaluation") {
  ScalarExpr e = ScalarExpr::parse("sin(x)^2 + cos(x)^2 + sqrt(y)", XY);
  for (int trial = 0; trial < 20; ++trial) {
    double x = testutil::uniform(-3.0, 3.0);
    double y = testutil::uniform(0.0, 4.0);
    REQUIRE_THAT(e.evaluate({x, y}), WithinAbs(1.0 + std::sqrt(y), 1e-14));
  }
}

TEST_CASE("powers are right-associative and unary minus binds the factor") {
  ScalarExpr e = ScalarExpr::parse("2^3^2", {});
  REQUIRE_THAT(e.evaluate(std::vector<double>{}), WithinAbs(512.0, 1e-12));
  ScalarExpr m = ScalarExpr::parse("-x^2", {"x"});
  REQUIRE_THAT(m.evaluate({3.0}), WithinAbs(-9.0, 1e-14));
}

TEST_CASE("division by zero and sqrt of negative raise numerical errors") {
  ScalarExpr d = ScalarExpr::parse("1/x", {"x"});
  REQUIRE_THROWS_AS(d.evaluate({0.0}), NumericalError);
  ScalarExpr s = ScalarExpr::parse("sqrt(x)", {"x"});
  REQUIRE_THROWS_AS(s.evaluate({-1.0}), NumericalError);
}

TEST_CASE("unknown functions and names are parse errors") {
  REQUIRE_THROWS_AS(ScalarExpr::parse("tan(x)", XY), ParseError);
  REQUIRE_THROWS_AS(ScalarExpr::parse("exp(x)", XY), ParseError);
  REQUIRE_THROWS_AS(ScalarExpr::parse("x + w", XY), ParseError);
  REQUIRE_THROWS_AS(ScalarExpr::parse("x + (y", XY), ParseError);
  REQUIRE_THROWS_AS(ScalarExpr::parse("x + y)", XY), ParseError);
}

TEST_CASE("map-based evaluation binds by name") {
  ScalarExpr e = ScalarExpr::parse("x^2 + y", XY);
  REQUIRE_THAT(e.evaluate_named({{"x", 3.0}, {"y", 4.0}}), WithinAbs(13.0, 1e-14));
  REQUIRE_THROWS_AS(e.evaluate_named({{"x", 3.0}}), algpde::Error);
}

TEST_CASE("parameterization components differentiate correctly by hand") {
  // derivative expressions are validated against finite differences of the
  // position expressions, the same way configs supply them
  ScalarExpr x = ScalarExpr::parse("cos(t)", {"t"});
  ScalarExpr dx = ScalarExpr::parse("-sin(t)", {"t"});
  for (int trial = 0; trial < 10; ++trial) {
    double t = testutil::uniform(0.0, 6.28);
    double fd = testutil::fd_derivative([&](double s) { return x.evaluate({s}); }, t);
    REQUIRE_THAT(dx.evaluate({t}), WithinAbs(fd, 1e-9));
  }
}
