#include <doctest.h>

#include <complex>
#include <random>
#include <vector>

#include "splitform/expr.hpp"

using namespace splitform;
using Eigen::VectorXd;

namespace {

double eval_at(const Expr& e, std::initializer_list<double> pt) {
  std::vector<double> v(pt);
  return eval<double>(e, v.data(), static_cast<int>(v.size()));
}

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

// Random polynomial with monomials of total degree <= 4, built from raw
// node constructors so the tree shapes vary.
Expr random_poly(std::mt19937_64& rng, int n_vars) {
  std::uniform_int_distribution<int> n_terms(1, 6);
  std::uniform_int_distribution<int> deg(0, 4);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  Expr acc = Expr::constant(coef(rng));
  const int terms = n_terms(rng);
  for (int t = 0; t < terms; ++t) {
    Expr mono = Expr::constant(coef(rng));
    int budget = deg(rng);
    while (budget > 0) {
      std::uniform_int_distribution<int> pick(0, n_vars - 1);
      std::uniform_int_distribution<int> p(1, budget);
      const int k = p(rng);
      mono = mono * pow(Expr::variable(pick(rng)), k);
      budget -= k;
    }
    acc = (t % 2 == 0) ? acc + mono : acc - mono;
  }
  return acc;
}

} // namespace

TEST_CASE("parsing and plain evaluation") {
  Expr e = parse_expr("x1*sin(x2) + 0.5*x3^2", 3);
  CHECK(eval_at(e, {2.0, 0.0, 3.0}) == doctest::Approx(4.5).epsilon(1e-14));
  CHECK(close_rel(eval_at(e, {2.0, 1.0, 3.0}), 2.0 * std::sin(1.0) + 4.5, 1e-15));

  Expr f = parse_expr("pow(x1 + x2, 3)", 2);
  CHECK(eval_at(f, {1.0, 2.0}) == doctest::Approx(27.0));

  Expr g = parse_expr("(x1 + x2) * (x1 - x2)", 2);
  CHECK(eval_at(g, {3.0, 2.0}) == doctest::Approx(5.0));

  Expr h = parse_expr("exp(log(x1)) / x1", 1);
  CHECK(eval_at(h, {1.7}) == doctest::Approx(1.0));
}

TEST_CASE("parse errors carry position") {
  try {
    parse_expr("1 + * x2", 2);
    FAIL("expected ParseError");
  } catch (const ParseError& pe) {
    CHECK(pe.line == 1);
    CHECK(pe.col == 5);
  }

  CHECK_THROWS_AS(parse_expr("pow(x1, 1.5)", 1), ParseError);
  CHECK_THROWS_AS(parse_expr("x1 + y2", 2), ParseError);
  CHECK_THROWS_AS(parse_expr("x7", 3), ParseError);
  CHECK_THROWS_AS(parse_expr("sin x1", 1), ParseError);
  CHECK_THROWS_AS(parse_expr("x1 +", 1), ParseError);
  CHECK_THROWS_AS(parse_expr("x1^2^3", 1), ParseError);

  try {
    parse_expr("x1 +\n 2 *", 1);
    FAIL("expected ParseError");
  } catch (const ParseError& pe) {
    CHECK(pe.line == 2);
  }
}

TEST_CASE("domain guards are hard errors") {
  Expr q = parse_expr("x1 / x2", 2);
  std::vector<double> at_zero = {1.0, 0.0};
  CHECK_THROWS_AS(eval<double>(q, at_zero.data(), 2), DomainError);

  Expr l = parse_expr("log(x1)", 1);
  double neg = -1.0;
  CHECK_THROWS_AS(eval<double>(l, &neg, 1), DomainError);
  double zero = 0.0;
  CHECK_THROWS_AS(eval<double>(l, &zero, 1), DomainError);

  Expr s = parse_expr("sqrt(x1)", 1);
  CHECK_THROWS_AS(eval<double>(s, &neg, 1), DomainError);

  Expr p = parse_expr("pow(x1, -2)", 1);
  CHECK_THROWS_AS(eval<double>(p, &zero, 1), DomainError);
}

TEST_CASE("jet evaluation matches the worked example") {
  Expr e = parse_expr("x1^2 * x2", 2);
  VectorXd p(2);
  p << 1.0, 2.0;
  std::vector<VectorXd> dirs = {VectorXd::Unit(2, 0), VectorXd::Unit(2, 1)};
  JetValue<double> j = eval_jet(e, p, dirs);
  CHECK(j.value == doctest::Approx(2.0));
  CHECK(j.grad[0] == doctest::Approx(4.0));
  CHECK(j.grad[1] == doctest::Approx(1.0));
  CHECK(j.hess(0, 0) == doctest::Approx(4.0));
  CHECK(j.hess(0, 1) == doctest::Approx(2.0));
  CHECK(j.hess(1, 1) == doctest::Approx(0.0));
  CHECK(j.hess(0, 1) == j.hess(1, 0));  // exact symmetry by storage
}

TEST_CASE("jet value part equals plain evaluation") {
  std::mt19937_64 rng(20240811);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int trial = 0; trial < 50; ++trial) {
    Expr e = random_poly(rng, 3);
    VectorXd p(3);
    p << u(rng), u(rng), u(rng);
    std::vector<VectorXd> dirs = {VectorXd::Unit(3, 0)};
    JetValue<double> j = eval_jet(e, p, dirs);
    const double plain = eval<double>(e, p.data(), 3);
    CHECK(j.value == plain);
  }
}

TEST_CASE("jet derivatives agree with the symbolic oracle") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  for (int trial = 0; trial < 200; ++trial) {
    Expr e = random_poly(rng, 3);
    VectorXd p(3);
    p << u(rng), u(rng), u(rng);
    std::vector<VectorXd> dirs = {VectorXd::Unit(3, 0), VectorXd::Unit(3, 1), VectorXd::Unit(3, 2)};
    JetValue<double> j = eval_jet(e, p, dirs);
    for (int a = 0; a < 3; ++a) {
      const double da = eval<double>(derivative(e, a), p.data(), 3);
      CHECK(close_rel(j.grad[a], da, 1e-12));
      for (int b = 0; b < 3; ++b) {
        const double dab = eval<double>(derivative(derivative(e, a), b), p.data(), 3);
        CHECK(close_rel(j.hess(a, b), dab, 1e-12));
      }
    }
  }
}

TEST_CASE("jet derivatives of transcendental nodes agree with the oracle") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.3, 1.4);
  const char* texts[] = {
      "exp(x1*x2) - sin(x2)*cos(x1)",
      "log(x1 + x2^2) * x2",
      "sqrt(x1^2 + x2^2) + x1/x2",
      "sin(cos(x1) + x2) - exp(-x1)",
  };
  for (const char* txt : texts) {
    Expr e = parse_expr(txt, 2);
    for (int trial = 0; trial < 20; ++trial) {
      VectorXd p(2);
      p << u(rng), u(rng);
      VectorXd d1(2), d2(2);
      d1 << 0.6, -0.2;
      d2 << 0.1, 0.9;
      std::vector<VectorXd> dirs = {d1, d2};
      JetValue<double> j = eval_jet(e, p, dirs);
      // Directional oracle: contract full symbolic gradient/Hessian with dirs.
      double g0 = 0, g1 = 0, h01 = 0;
      for (int a = 0; a < 2; ++a) {
        const double da = eval<double>(derivative(e, a), p.data(), 2);
        g0 += da * d1[a];
        g1 += da * d2[a];
        for (int b = 0; b < 2; ++b)
          h01 += eval<double>(derivative(derivative(e, a), b), p.data(), 2) * d1[a] * d2[b];
      }
      CHECK(close_rel(j.grad[0], g0, 1e-11));
      CHECK(close_rel(j.grad[1], g1, 1e-11));
      CHECK(close_rel(j.hess(0, 1), h01, 1e-11));
    }
  }
}

TEST_CASE("associativity holds to relative 1e-15") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    Expr a = Expr::constant(u(rng)), b = Expr::constant(u(rng)), c = Expr::constant(u(rng));
    Expr lhs = (a + b) + c;
    Expr rhs = a + (b + c);
    const double l = eval<double>(lhs, nullptr, 0);
    const double r = eval<double>(rhs, nullptr, 0);
    CHECK(close_rel(l, r, 1e-15));
  }
}

TEST_CASE("complex constants require complex mode") {
  Expr e = parse_expr("i * x1", 1);
  double two = 2.0;
  CHECK_THROWS_AS(eval<double>(e, &two, 1), DomainError);

  std::complex<double> z = 2.0;
  const std::complex<double> r = eval<std::complex<double>>(e, &z, 1);
  CHECK(r.real() == doctest::Approx(0.0));
  CHECK(r.imag() == doctest::Approx(2.0));

  VectorXd p(1);
  p << 2.0;
  JetValue<std::complex<double>> j = eval_jet_complex(e, p, {VectorXd::Unit(1, 0)});
  CHECK(j.grad[0].imag() == doctest::Approx(1.0));
}

TEST_CASE("empty direction list gives a bare value") {
  Expr e = parse_expr("x1 + 1", 1);
  VectorXd p(1);
  p << 4.0;
  JetValue<double> j = eval_jet(e, p, {});
  CHECK(j.value == doctest::Approx(5.0));
  CHECK(j.grad.size() == 0);
}

TEST_CASE("more than three directions is rejected") {
  Expr e = parse_expr("x1", 4);
  VectorXd p = VectorXd::Zero(4);
  std::vector<VectorXd> dirs(4, VectorXd::Unit(4, 0));
  CHECK_THROWS_AS(eval_jet(e, p, dirs), Error);
}
