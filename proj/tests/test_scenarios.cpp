#include "mixedcurv/builtins.hpp"
#include "mixedcurv/charts.hpp"
#include "mixedcurv/scenarios.hpp"
#include "mixedcurv/twisted.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

using namespace mixedcurv;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

constexpr double pi = std::numbers::pi;

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<int>(v.size()));
  int i = 0;
  for (double a : v) x[i++] = a;
  return x;
}

ChartManifold line(const std::string& name, Interval iv = {}) {
  auto m = charts::euclidean(1, {name});
  m.domain = {iv};
  return m;
}

ChartManifold circle(const std::string& name) { return line(name, Interval{-pi, pi, true}); }

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::ValidationError;
}

}  // namespace

TEST_CASE("mixed scalar curvature of warped products", "[twisted]") {
  SECTION("round sphere") {
    const auto tp = build_twisted_product(line("t", {0, pi}), {circle("theta")}, {WarpExpression("sin(t)")});
    CHECK(tp.is_warped);
    for (double t : {0.3, 1.2, 2.5}) {
      const auto r = evaluate_twisted_smix(tp, vec({t, 0.4}));
      CHECK_THAT(r.lhs, WithinAbs(1.0, 1e-6));
      CHECK_THAT(r.rhs, WithinAbs(1.0, 1e-6));
      CHECK(r.residual <= 1e-6);
      CHECK_THAT(tp.log_gradient_sq(0, vec({t, 0.4})), WithinAbs(std::pow(std::cos(t) / std::sin(t), 2), 1e-12));
    }
  }
  SECTION("direct product") {
    const auto tp = build_twisted_product(line("t"), {line("y")}, {WarpExpression("3")});
    const auto r = evaluate_twisted_smix(tp, vec({0.2, -0.1}));
    CHECK(std::abs(r.lhs) <= 1e-8);
    CHECK(std::abs(r.rhs) <= 1e-8);
  }
  SECTION("hyperbolic plane") {
    const auto tp = build_twisted_product(line("t"), {line("y")}, {WarpExpression("exp(t)")});
    for (double t : {-1.0, 0.0, 0.7}) {
      const auto r = evaluate_twisted_smix(tp, vec({t, 0.5}));
      CHECK_THAT(r.lhs, WithinAbs(-1.0, 1e-6));
      CHECK_THAT(r.rhs, WithinAbs(-1.0, 1e-6));
    }
  }
  SECTION("two fibers") {
    const auto tp = build_twisted_product(line("t"), {line("y"), line("z")},
                                          {WarpExpression("exp(t)"), WarpExpression("exp(2*t)")});
    CHECK(tp.k() == 3);
    const auto r = evaluate_twisted_smix(tp, vec({0.3, 0.1, -0.2}));
    CHECK_THAT(r.lhs, WithinAbs(-5.0, 1e-5));
    CHECK_THAT(r.rhs, WithinAbs(-5.0, 1e-5));
    // the fiber planes carry −⟨∇log u_2, ∇log u_3⟩ = −2 on top
    CHECK_THAT(fiber_fiber_smix(tp, vec({0.3, 0.1, -0.2})), WithinAbs(-2.0, 1e-5));
  }
  SECTION("fiber-dependent warping") {
    // dt² + e^{2ty} dy²: K = −∂²_t u / u = −y²
    const auto tp = build_twisted_product(line("t"), {line("y")}, {WarpExpression("exp(t*y)")});
    CHECK_FALSE(tp.is_warped);
    for (double y : {-0.8, 0.3, 1.1}) {
      const auto r = evaluate_twisted_smix(tp, vec({0.2, y}));
      CHECK_THAT(r.lhs, WithinAbs(-y * y, 1e-5));
      CHECK(r.residual <= 1e-5);
    }
  }
}

TEST_CASE("twisted product validation", "[twisted]") {
  CHECK(kind_of([] {
          (void)build_twisted_product(line("t"), {line("y"), line("z")},
                                      {WarpExpression("1"), WarpExpression("2"), WarpExpression("3")});
        }) == ErrorKind::DimensionMismatch);
  CHECK(kind_of([] { (void)build_twisted_product(line("t"), {line("y")}, {WarpExpression("t")}); }) ==
        ErrorKind::NonPositiveWarping);
  CHECK(kind_of([] { (void)build_twisted_product(line("t", {0, pi}), {line("y")}, {WarpExpression("cos(t)")}); }) ==
        ErrorKind::NonPositiveWarping);
  // u_2 may not see another fiber's coordinates
  CHECK(kind_of([] {
          (void)build_twisted_product(line("t"), {line("y"), line("z")}, {WarpExpression("exp(z)"), WarpExpression("1")});
        }) == ErrorKind::ValidationError);
  CHECK(kind_of([] { (void)build_twisted_product(line("t"), {line("t")}, {WarpExpression("1")}); }) ==
        ErrorKind::ValidationError);
  try {
    (void)build_twisted_product(line("t"), {line("y")}, {WarpExpression("t + 0.5")});
    FAIL("expected NonPositiveWarping");
  } catch (const Error& e) {
    CHECK_THAT(std::string(e.what()), ContainsSubstring("t="));
  }
}

TEST_CASE("leaf quadrature", "[twisted]") {
  const auto tp = build_twisted_product(line("t", {0, pi}), {circle("theta")}, {WarpExpression("sin(t)")});
  for (double t0 : {0.4, pi / 2, 2.9}) {
    double len = 0;
    for (const auto& q : leaf_quadrature(tp.manifold, {1}, vec({t0, 0}), 32)) len += q.weight;
    CHECK_THAT(len, WithinAbs(2 * pi * std::sin(t0), 1e-3));
  }
  double unit = 0;
  for (const auto& q : leaf_quadrature(line("s", {0, 1}), {0}, vec({0}), 7)) unit += q.weight;
  CHECK_THAT(unit, WithinAbs(1.0, 1e-14));

  auto flat = charts::euclidean(2, {"a", "b"});
  flat.domain = {Interval{-pi, pi, true}, Interval{-pi, pi, true}};
  double area = 0;
  for (const auto& q : leaf_quadrature(flat, {0, 1}, vec({0, 0}), 12)) area += q.weight;
  CHECK_THAT(area, WithinAbs(4 * pi * pi, 1e-10));

  const auto torus = build_twisted_product(circle("theta"), {circle("phi")}, {WarpExpression("2 + cos(theta)")});
  double tarea = 0;
  for (const auto& q : leaf_quadrature(torus.manifold, {0, 1}, vec({0, 0}), 16)) tarea += q.weight;
  CHECK_THAT(tarea, WithinAbs(8 * pi * pi, 1e-9));

  CHECK(kind_of([&] { (void)leaf_quadrature(line("s"), {0}, vec({0}), 8); }) == ErrorKind::UnboundedLeaf);
  CHECK(kind_of([&] { (void)leaf_quadrature(line("s", {0, 1}), {0}, vec({0}), 0); }) == ErrorKind::ValidationError);
}

TEST_CASE("scenario documents", "[scenarios]") {
  SECTION("malformed JSON reports a byte offset") {
    try {
      (void)parse_scenario_text("{\"mixedcurv_schema\": 1,, }");
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ValidationError);
      CHECK_THAT(std::string(e.what()), ContainsSubstring("byte offset 24"));
    }
  }
  SECTION("unknown fields are rejected, all at once") {
    const auto doc = parse_scenario_text(R"json({"mixedcurv_schema": 1, "colour": "red",
      "manifold": {"coordinates": ["x", "y"], "space_form": {"curvature": 0}, "shape": 1},
      "checks": [{"id": "PW3K"}]})json");
    try {
      (void)build_scenario(doc);
      FAIL("expected a validation failure");
    } catch (const ValidationFailure& e) {
      CHECK(e.issues().size() >= 2);
      CHECK_THAT(std::string(e.what()), ContainsSubstring("'colour'"));
      CHECK_THAT(std::string(e.what()), ContainsSubstring("'shape'"));
    }
  }
  SECTION("missing ingredients") {
    const auto doc = parse_scenario_text(R"json({"mixedcurv_schema": 1,
      "manifold": {"coordinates": ["x", "y"], "space_form": {"curvature": 0}},
      "distributions": [["x"], ["y"]], "checks": [{"id": "MAIN"}]})json");
    try {
      (void)build_scenario(doc);
      FAIL("expected a validation failure");
    } catch (const ValidationFailure& e) {
      CHECK(e.kind() == ErrorKind::MissingImmersion);
    }
    const auto doc2 = parse_scenario_text(R"json({"mixedcurv_schema": 1,
      "manifold": {"coordinates": ["x", "y"], "space_form": {"curvature": 0}},
      "distributions": [["x"], ["y"]], "checks": [{"id": "TWISTED_SMIX"}]})json");
    CHECK(kind_of([&] { (void)build_scenario(doc2); }) == ErrorKind::NotTwistedProduct);
  }
  SECTION("non-isometric maps are caught at build time") {
    const auto doc = parse_scenario_text(R"json({"mixedcurv_schema": 1,
      "manifold": {"coordinates": ["x", "y"], "space_form": {"curvature": 0}},
      "distributions": [["x"], ["y"]],
      "ambient": {"coordinates": ["a", "b", "c"], "space_form": {"curvature": 0}},
      "immersion": {"map": ["2*x", "y", "0"]}, "checks": [{"id": "GAUSS"}]})json");
    CHECK(kind_of([&] { (void)build_scenario(doc); }) == ErrorKind::NotIsometric);
  }
  SECTION("a wrong curvature declaration is caught") {
    const auto doc = parse_scenario_text(R"json({"mixedcurv_schema": 1,
      "manifold": {"coordinates": ["t", "y"], "metric": [["1", "0"], ["", "exp(2*t)"]], "curvature": 1},
      "distributions": [["t"], ["y"]], "checks": [{"id": "PW3K"}]})json");
    CHECK(kind_of([&] { (void)build_scenario(doc); }) == ErrorKind::ValidationError);
  }
  SECTION("points and overrides") {
    const auto doc = parse_scenario_text(R"json({"mixedcurv_schema": 1,
      "manifold": {"coordinates": ["x", "y"], "space_form": {"curvature": 0}},
      "distributions": [["x"], ["y"]], "checks": [{"id": "PW3K"}],
      "points": [[0, 0], ["pi/4", "-1"]]})json");
    const auto sc = build_scenario(doc);
    REQUIRE(sc.points.size() == 2);
    CHECK_THAT(sc.points[1][0], WithinAbs(pi / 4, 1e-15));
    ScenarioOverrides ov;
    ov.grid = 2;
    CHECK(build_scenario(doc, ov).points.size() == 4);
  }
}

TEST_CASE("builtin catalog", "[scenarios]") {
  const auto names = builtin_names();
  CHECK(names.size() >= 12);
  const auto s3 = build_scenario(load_builtin("s3_ranks_1_2"));
  CHECK(s3.label == "s3_ranks_1_2");
  CHECK(s3.compact);
  CHECK(s3.distributions->ranks() == std::vector<int>{1, 2});
  CHECK(s3.manifold.constant_curvature == 1.0);
  CHECK(s3.points.size() == 27);
  CHECK(kind_of([] { (void)load_builtin("nope"); }) == ErrorKind::ValidationError);

  for (const auto& name : names) {
    INFO(name);
    const auto sc = build_scenario(load_scenario_ref("builtin:" + name));
    CHECK_FALSE(sc.checks.empty());
    CHECK_FALSE(sc.points.empty());
    // every twisted product satisfies the mixed scalar curvature identity
    if (sc.twisted)
      for (const auto& x : midpoint_grid(sc.manifold, 3))
        CHECK(twisted_smix_residual(*sc.twisted, x) <= 1e-5);
  }

  const auto ws = build_scenario(load_builtin("warped_sphere"));
  REQUIRE(ws.twisted);
  CHECK(ws.compact);
  CHECK_FALSE(ws.base_compact);
  REQUIRE(ws.checks.size() > 11);
  const auto& pair = ws.checks[11];
  CHECK(pair.id == CheckId::TWISTED_PAIR);
  REQUIRE(pair.leaf);
  CHECK(pair.leaf->block == 1);
  double len = 0;
  for (const auto& q : leaf_quadrature(ws, *pair.leaf, ws.points.front(), pair.resolution)) len += q.weight;
  CHECK_THAT(len, WithinAbs(2 * pi, 1e-9));
}
