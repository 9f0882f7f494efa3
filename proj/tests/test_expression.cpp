#include "mixedcurv/expression.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

using namespace mixedcurv;
using Catch::Matchers::WithinAbs;

namespace {

double eval1(const std::string& src, const std::string& var, double v) {
  const std::vector<std::string> names{var};
  const std::vector<double> vals{v};
  return WarpExpression(src).evaluate(names, vals);
}

expr::NodePtr random_tree(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 9);
  std::uniform_int_distribution<int> small(0, 20);
  static const char* vars[] = {"t", "s", "x_1"};
  switch (pick(rng)) {
    case 0: return expr::number(small(rng) * 0.25);
    case 1: return expr::variable(vars[small(rng) % 3]);
    case 2: return expr::unary(expr::Op::Neg, random_tree(rng, depth - 1));
    case 3: return expr::binary(expr::Op::Add, random_tree(rng, depth - 1), random_tree(rng, depth - 1));
    case 4: return expr::binary(expr::Op::Sub, random_tree(rng, depth - 1), random_tree(rng, depth - 1));
    case 5: return expr::binary(expr::Op::Mul, random_tree(rng, depth - 1), random_tree(rng, depth - 1));
    case 6: return expr::binary(expr::Op::Div, random_tree(rng, depth - 1), random_tree(rng, depth - 1));
    case 7: return expr::binary(expr::Op::Pow, random_tree(rng, depth - 1), random_tree(rng, depth - 1));
    default: return expr::call(static_cast<expr::Func>(small(rng) % 9), random_tree(rng, depth - 1));
  }
}

}  // namespace

TEST_CASE("evaluation of simple expressions", "[expression]") {
  CHECK_THAT(eval1("sin(t)^2", "t", std::numbers::pi / 2), WithinAbs(1.0, 1e-15));
  CHECK_THAT(eval1("exp(2*t)", "t", 0.5), WithinAbs(std::numbers::e, 1e-12));
  CHECK_THAT(eval1("1 + 2*3 - 4/2", "t", 0.0), WithinAbs(5.0, 0.0));
  CHECK_THAT(eval1("2^3^2", "t", 0.0), WithinAbs(512.0, 0.0));
  CHECK_THAT(eval1("-2^2", "t", 0.0), WithinAbs(4.0, 0.0));
  CHECK_THAT(eval1("-(2^2)", "t", 0.0), WithinAbs(-4.0, 0.0));
  CHECK_THAT(eval1("sqrt(t)*log(exp(1))", "t", 9.0), WithinAbs(3.0, 1e-15));
  CHECK_THAT(eval1("2*pi", "t", 0.0), WithinAbs(2 * std::numbers::pi, 0.0));
  CHECK_THAT(eval1("1.5e-1 + .5", "t", 0.0), WithinAbs(0.65, 1e-15));
}

TEST_CASE("syntax errors carry the offset and the expected token", "[expression]") {
  try {
    (void)WarpExpression("sin(t");
    FAIL("expected a syntax error");
  } catch (const SyntaxError& e) {
    CHECK(e.offset() == 5);
    CHECK(e.expected() == "')'");
  }
  try {
    (void)WarpExpression("1 + * 2");
    FAIL("expected a syntax error");
  } catch (const SyntaxError& e) {
    CHECK(e.offset() == 4);
  }
  CHECK_THROWS_AS(WarpExpression(""), SyntaxError);
  CHECK_THROWS_AS(WarpExpression("t t"), SyntaxError);
}

TEST_CASE("unknown names are rejected", "[expression]") {
  try {
    (void)WarpExpression("foo(t)");
    FAIL("expected UnknownFunction");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownFunction);
  }
  try {
    (void)eval1("t + r", "t", 1.0);
    FAIL("expected UnknownIdentifier");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownIdentifier);
  }
}

TEST_CASE("free variables and canonical text", "[expression]") {
  const WarpExpression w("u*sin(t) + t^2");
  CHECK(w.free_variables() == std::vector<std::string>{"t", "u"});
  CHECK(w.canonical() == "u*sin(t)+t^2");
  CHECK(WarpExpression("(a-b)-(c-d)").canonical() == "a-b-(c-d)");
  CHECK(WarpExpression("a/(b*c)").canonical() == "a/(b*c)");
  CHECK(WarpExpression("(-x)^2").canonical() == "-x^2");
}

TEST_CASE("symbolic derivatives agree with closed forms", "[expression]") {
  const std::vector<std::string> names{"t"};
  auto d = [&](const std::string& src, double t) {
    const std::vector<double> v{t};
    return WarpExpression(src).derivative("t").evaluate(names, v);
  };
  for (double t : {0.3, 1.1, 2.0}) {
    CHECK_THAT(d("sin(t)^2", t), WithinAbs(2 * std::sin(t) * std::cos(t), 1e-13));
    CHECK_THAT(d("exp(2*t)", t), WithinAbs(2 * std::exp(2 * t), 1e-12));
    CHECK_THAT(d("t^t", t), WithinAbs(std::pow(t, t) * (std::log(t) + 1), 1e-12));
    CHECK_THAT(d("tan(t)/sqrt(t)", t),
               WithinAbs(1 / (std::cos(t) * std::cos(t) * std::sqrt(t)) - std::tan(t) / (2 * std::pow(t, 1.5)),
                         1e-11));
    CHECK_THAT(d("cosh(t)*tanh(t)", t), WithinAbs(std::cosh(t), 1e-12));
  }
  CHECK(WarpExpression("5*s").derivative("t").canonical() == "0");
}

TEST_CASE("print then parse reproduces the tree", "[expression][property]") {
  std::mt19937_64 rng(20240611);
  for (int i = 0; i < 1000; ++i) {
    const auto tree = random_tree(rng, 5);
    const std::string text = expr::to_string(tree);
    INFO(text);
    const auto back = expr::parse(text);
    REQUIRE(expr::equal(tree, back));
    CHECK(expr::to_string(back) == text);
  }
}
