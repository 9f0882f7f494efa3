#include "mixedcurv/charts.hpp"
#include "mixedcurv/extremal.hpp"
#include "test_support.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace mixedcurv;
using Catch::Matchers::WithinAbs;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<int>(v.size()));
  int i = 0;
  for (double a : v) x[i++] = a;
  return x;
}

ChartManifold s2xr() { return charts::product({charts::sphere(2), charts::euclidean(1, {"z"})}); }

OptimizerParams small(int restarts = 8, std::uint64_t seed = 1) {
  OptimizerParams p;
  p.restarts = restarts;
  p.grid_per_axis = 2;
  p.seed = seed;
  return p;
}

// brute-force oracle: best objective over random configurations
double brute_force(const CurvatureAtPoint& curv, const std::vector<int>& ranks, int samples, std::uint64_t seed) {
  double best = -1e300;
  for (int s = 0; s < samples; ++s)
    best = std::max(best, smix_of_config(curv, random_config(curv.metric, curv.point, ranks, counter_seed(seed, s))));
  return best;
}

}  // namespace

TEST_CASE("mixed scalar curvature of configurations", "[extremal]") {
  const auto r3 = charts::euclidean(3);
  CHECK(smix_of_config(r3, random_config(Matrix::Identity(3, 3), vec({0, 0, 0}), {1, 2}, 5)) == 0.0);

  const auto s4 = charts::sphere(4);
  const Vector x = vec({1.0, 1.1, 2.0, 0.4});
  const Matrix g = metric_at(s4, x);
  CHECK_THAT(smix_of_config(s4, random_config(g, x, {2, 2}, 3)), WithinAbs(4.0, 1e-5));

  const auto m = s2xr();
  const Vector y = vec({1.2, 0.3, 0.0});
  SubspaceConfig c{y, Matrix::Zero(3, 2), {1, 1}};
  c.basis(0, 0) = 1.0;
  c.basis(1, 1) = 1.0 / std::sin(1.2);
  CHECK_THAT(smix_of_config(m, c), WithinAbs(1.0, 1e-5));

  SubspaceConfig bad{y, Matrix::Ones(3, 2), {1, 1}};
  try {
    (void)smix_of_config(m, bad);
    FAIL("expected NotOrthonormal");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotOrthonormal);
  }
}

TEST_CASE("intra-block rotations do not change the mixed curvature", "[extremal][property]") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto m = testing_support::random_perturbation_metric(5, seed);
    std::mt19937_64 rng(seed);
    const auto curv = curvature_at(m, testing_support::random_point(rng, 5, -0.5, 0.5));
    const auto c = random_config(curv.metric, curv.point, {2, 3}, seed);
    const double base = smix_of_config(curv, c);
    // columns 0,1 form block 1; columns 2..4 block 2
    for (auto [p, q] : {std::pair{0, 1}, std::pair{2, 4}, std::pair{3, 4}}) {
      const auto r = rotate_config(curv.metric, c, p, q, 0.7 * p + 0.3);
      CHECK_THAT(smix_of_config(curv, r), WithinAbs(base, 1e-9 * std::max(1.0, std::abs(base))));
    }
  }
}

TEST_CASE("Givens directional derivatives match central differences", "[extremal][property]") {
  std::mt19937_64 rng(2024);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int N = 3 + trial % 3;
    const auto m = testing_support::random_perturbation_metric(N, 500 + trial, 0.6);
    const auto curv = curvature_at(m, testing_support::random_point(rng, N, -0.7, 0.7));
    const std::vector<int> ranks = N == 3 ? std::vector<int>{1, 1} : std::vector<int>{1, 2};
    const auto c = random_config(curv.metric, curv.point, ranks, counter_seed(3, trial));
    std::uniform_int_distribution<int> pick(0, N - 1);
    int p = pick(rng), q = pick(rng);
    while (q == p) q = pick(rng);
    const double analytic = smix_directional_derivative(curv, c, p, q);
    const double h = 1e-4;
    const double numeric = (smix_of_config(curv, rotate_config(curv.metric, c, p, q, h)) -
                            smix_of_config(curv, rotate_config(curv.metric, c, p, q, -h))) /
                           (2 * h);
    INFO("trial " << trial << " analytic " << analytic << " numeric " << numeric);
    CHECK(std::abs(analytic - numeric) <= 1e-5 * std::max(1.0, std::abs(analytic)));
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("optimizer on flat and constant-curvature ambients", "[extremal]") {
  SECTION("Euclidean: every restart gives zero") {
    const auto res = optimize_config(charts::euclidean(3), {1, 2}, Objective::smix(), small());
    CHECK(res.value == 0.0);
    for (const auto& rv : res.restart_values)
      for (double v : rv) CHECK(v == 0.0);
    CHECK(delta_mix(charts::euclidean(3), {1, 2}, small()).value == 0.0);
  }
  SECTION("space forms: closed form and optimizer agree") {
    const auto s3 = delta_mix(charts::sphere(3), {1, 2}, small());
    CHECK(s3.closed_form);
    CHECK(s3.value == 2.0);
    REQUIRE(s3.cross_check);
    CHECK_THAT(*s3.cross_check, WithinAbs(2.0, 1e-4));
    CHECK_THAT(optimize_config(charts::sphere(3), {1, 2}, Objective::smix(), small()).value, WithinAbs(2.0, 1e-4));
    CHECK(delta_mix(charts::sphere(4), {1, 1, 1}, small()).value == 3.0);
    CHECK(delta_mix(charts::hyperbolic(2), {1, 1}, small()).value == -1.0);
    CHECK_THAT(optimize_config(charts::hyperbolic(3), {1, 1}, Objective::smix(), small()).value, WithinAbs(-1.0, 1e-4));
  }
  SECTION("infeasible requests") {
    CHECK_THROWS_AS(optimize_config(charts::euclidean(3), {2, 2}, Objective::smix(), small()), Error);
    CHECK_THROWS_AS(optimize_config(charts::euclidean(3), {3}, Objective::smix(), small()), Error);
    OptimizerParams p = small();
    p.points = std::vector<Vector>{};
    try {
      (void)optimize_config(charts::euclidean(3), {1, 1}, Objective::smix(), p);
      FAIL("expected EmptyRegion");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::EmptyRegion);
    }
  }
}

TEST_CASE("optimizer on S^2 x R", "[extremal]") {
  const auto m = s2xr();
  const auto res = optimize_config(m, {1, 1}, Objective::smix(), small(16));
  const auto curv = curvature_at(m, res.argmax.point);
  const double oracle = brute_force(curv, {1, 1}, 100000, 17);
  CHECK_THAT(res.value, WithinAbs(1.0, 1e-4));
  CHECK(res.value >= oracle - 1e-6);
  // the maximizing plane is tangent to the sphere: no z-components
  CHECK(std::abs(res.argmax.basis(2, 0)) <= 1e-2);
  CHECK(std::abs(res.argmax.basis(2, 1)) <= 1e-2);
  CHECK_THAT(smix_of_config(m, res.argmax), WithinAbs(res.value, 1e-10));
}

TEST_CASE("constrained supremum", "[extremal]") {
  const auto m = s2xr();
  const auto d = DistributionSet::from_coordinates(m, {{0, 1}, {2}});
  const auto hat = hat_delta_mix(d, {1, 1}, small());
  CHECK_THAT(hat.value, WithinAbs(0.0, 1e-4));
  CHECK(hat.value < optimize_config(m, {1, 1}, Objective::smix(), small()).value - 0.5);

  const auto e = hat_delta_mix(DistributionSet::from_coordinates(charts::euclidean(3), {{0}, {1, 2}}), {1, 1}, small());
  CHECK(e.value == 0.0);

  const auto s3 = DistributionSet::from_coordinates(charts::sphere(3), {{0}, {1, 2}});
  CHECK_THAT(hat_delta_mix(s3, {1, 1}, small()).value, WithinAbs(1.0, 1e-4));

  try {
    (void)hat_delta_mix(s3, {2, 1}, small());
    FAIL("expected RanksExceedDistribution");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::RanksExceedDistribution);
  }
}

TEST_CASE("Chen invariant and q-th Ricci supremum", "[extremal]") {
  CHECK(chen_delta(charts::euclidean(3), {1, 1}, small()) == 0.0);
  CHECK_THAT(chen_delta(charts::sphere(4), {2, 2}, small()), WithinAbs(4.0, 1e-4));
  const double d11 = chen_delta(charts::sphere(3), {1, 1}, small());
  CHECK(d11 >= delta_mix(charts::sphere(3), {1, 1}, small()).value - 1e-4);
  CHECK_THAT(d11, WithinAbs(3.0, 1e-4));

  CHECK(qth_ricci_sup(charts::euclidean(3), 2, small()) == 0.0);
  CHECK_THAT(qth_ricci_sup(charts::sphere(3), 2, small()), WithinAbs(2.0, 1e-4));

  const auto s3s3 = charts::product({charts::sphere(3, 1.0, {"a1", "a2", "a3"}), charts::sphere(3, 1.0, {"b1", "b2", "b3"})});
  OptimizerParams p = small(32);
  p.points = std::vector<Vector>{vec({1.0, 1.2, 0.3, 2.0, 1.4, -1.0})};
  const double r4 = qth_ricci_sup(s3s3, 4, p);
  const auto curv = curvature_at(s3s3, p.points->front());
  const double oracle = brute_force(curv, {1, 4}, 100000, 29);
  CHECK_THAT(r4, WithinAbs(2.0, 1e-3));
  CHECK(r4 >= oracle - 1e-6);
}

TEST_CASE("ascent is monotone and reproducible", "[extremal][property]") {
  const auto m = testing_support::random_perturbation_metric(4, 77, 0.8);
  OptimizerParams p = small(6, 5);
  p.record_traces = true;
  const auto a = optimize_config(m, {1, 2}, Objective::smix(), p);
  for (const auto& per_point : a.traces)
    for (const auto& trace : per_point)
      for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1] - 1e-12);
  const auto b = optimize_config(m, {1, 2}, Objective::smix(), p);
  CHECK(a.value == b.value);
  CHECK(a.argmax.basis == b.argmax.basis);
  p.threads = 3;
  const auto c = optimize_config(m, {1, 2}, Objective::smix(), p);
  CHECK(a.value == c.value);
  CHECK(a.restart_values == c.restart_values);
}

TEST_CASE("the optimum dominates random configurations", "[extremal][property]") {
  const auto m = testing_support::random_perturbation_metric(4, 91, 0.8);
  OptimizerParams p = small(16);
  p.points = std::vector<Vector>{vec({0.1, -0.3, 0.2, 0.4})};
  const auto res = optimize_config(m, {1, 2}, Objective::smix(), p);
  const auto curv = curvature_at(m, p.points->front());
  for (int s = 0; s < 1000; ++s) {
    const auto c = random_config(curv.metric, curv.point, {1, 2}, counter_seed(123, s));
    CHECK(smix_of_config(curv, c) <= res.value + 1e-6);
  }
  CHECK_THAT(smix_of_config(curv, res.argmax), WithinAbs(res.value, 1e-10));
}

TEST_CASE("sample grids", "[extremal]") {
  OptimizerParams p;
  p.grid_per_axis = 9;
  CHECK(detail::region_points(charts::euclidean(2), p).size() == 81);
  CHECK(detail::region_points(charts::euclidean(5), p).size() <= 4096);
  p.grid_per_axis = 3;
  const auto pts = detail::region_points(charts::sphere(2), p);
  REQUIRE(pts.size() == 9);
  CHECK_THAT(pts.front()[0], WithinAbs(std::numbers::pi / 6, 1e-15));
}
