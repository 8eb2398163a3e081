#include "splitform/normalform.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "splitform/dirac.hpp"

using namespace splitform;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Bivector so3_bivector() {
  const Chart c = Chart::ball(3, VectorXd::Zero(3), 0.8);
  Bivector pi = Bivector::zero(c);
  pi.set(0, 1, Expr::variable(2));
  pi.set(0, 2, -Expr::variable(1));
  pi.set(1, 2, Expr::constant(1.0) + Expr::variable(0));
  return pi;
}

Bivector canonical_r4() {
  const Chart c = Chart::ball(4, VectorXd::Zero(4), 1.1);
  Bivector pi = Bivector::zero(c);
  pi.set(0, 1, Expr::constant(-1.0));
  pi.set(2, 3, Expr::constant(-1.0));
  return pi;
}

// N x R^2 with a variable transverse-tangent factor on the base plane.
Bivector product_bivector() {
  const Chart c = Chart::ball(4, VectorXd::Zero(4), 0.9);
  Bivector pi = Bivector::zero(c);
  pi.set(0, 1, Expr::constant(0.4) + Expr::constant(0.1) * Expr::variable(0));
  pi.set(2, 3, Expr::constant(-1.0));
  return pi;
}

Bivector heisenberg_bivector() {
  const Chart c = Chart::ball(3, VectorXd::Zero(3), 0.7);
  Bivector pi = Bivector::zero(c);
  pi.set(1, 2, Expr::constant(1.0) + Expr::variable(0));
  return pi;
}

std::vector<VectorXd> cloud(int dim, double radius, int count, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> dist(-radius, radius);
  std::vector<VectorXd> out;
  for (int i = 0; i < count; ++i) {
    VectorXd p(dim);
    for (int a = 0; a < dim; ++a) p(a) = dist(gen);
    out.push_back(p);
  }
  return out;
}

double max_entry_error(const OneForm& a, const std::vector<Expr>& expect,
                       const std::vector<VectorXd>& pts) {
  double worst = 0.0;
  for (const auto& p : pts)
    for (size_t i = 0; i < expect.size(); ++i)
      worst = std::max(worst, std::abs(eval<double>(a.comps[i], p) - eval<double>(expect[i], p)));
  return worst;
}

}  // namespace

TEST_CASE("conormal pairing and cosymplectic check") {
  const Bivector pi = so3_bivector();
  const Transversal nu{pi.chart, 1};

  VectorXd y(1);
  y << 0.2;
  const MatrixXd P = ann_pairing(pi, nu, y);
  CHECK(P(0, 0) == doctest::Approx(0.0));
  CHECK(P(0, 1) == doctest::Approx(1.2));
  CHECK(P(1, 0) == doctest::Approx(-1.2));

  std::vector<VectorXd> base = {VectorXd::Zero(1), y};
  CHECK(cosymplectic_check(pi, nu, base));

  // odd normal count: the pairing is an odd antisymmetric matrix
  const Transversal odd{pi.chart, 2};
  CHECK_FALSE(cosymplectic_check(pi, odd, {VectorXd::Zero(2)}));

  // degenerate on the axis itself
  Bivector line = Bivector::zero(pi.chart);
  line.set(1, 2, Expr::variable(0));
  CHECK_FALSE(cosymplectic_check(line, nu, base));

  const Bivector p0 = canonical_r4();
  CHECK(cosymplectic_check(p0, Transversal{p0.chart, 0}, {VectorXd::Zero(0)}));
}

TEST_CASE("alpha solve recovers closed forms") {
  const auto pts4 = cloud(4, 0.5, 20, 11);
  {
    const Bivector pi = canonical_r4();
    const Transversal nu{pi.chart, 0};
    const OneForm alpha = alpha_for_cosymplectic(pi, nu);
    const std::vector<Expr> expect = {-Expr::variable(1), Expr::variable(0), -Expr::variable(3),
                                      Expr::variable(2)};
    CHECK(max_entry_error(alpha, expect, pts4) < 1e-12);

    const VectorField X = sharp_field(pi, alpha);
    double worst = 0.0;
    for (const auto& p : pts4)
      for (int b = 0; b < 4; ++b)
        worst = std::max(worst, std::abs(eval<double>(X.comps[b], p) - p(b)));
    CHECK(worst < 1e-12);  // the sharp of alpha is the Euler field
  }
  {
    const Bivector pi = so3_bivector();
    const Transversal nu{pi.chart, 1};
    const OneForm alpha = alpha_for_cosymplectic(pi, nu);
    const Expr z = Expr::constant(1.0) + Expr::variable(0);
    const std::vector<Expr> expect = {Expr::constant(0.0), Expr::variable(2) / z,
                                      -Expr::variable(1) / z};
    CHECK(max_entry_error(alpha, expect, cloud(3, 0.4, 20, 12)) < 1e-12);
  }
  {
    Bivector line = Bivector::zero(Chart::ball(3, VectorXd::Zero(3), 0.8));
    line.set(1, 2, Expr::variable(0));
    CHECK_THROWS_AS(alpha_for_cosymplectic(line, Transversal{line.chart, 1}), PreconditionError);
  }
}

TEST_CASE("omega quadrature closed forms") {
  const Chart c2 = Chart::ball(2, VectorXd::Zero(2), 1.0);
  const Transversal nu2{c2, 0};
  const TubularEmbedding emb2 = linearize(VectorField::euler(c2).as_map(), nu2);
  const ThreeForm zero2 = ThreeForm::zero(c2);

  // d alpha = dx1 ^ dx2 constant: the scale integral halves it
  const OneForm a{c2, {Expr::constant(0.0), Expr::variable(0)}};
  const TwoFormEval w = omega_quadrature(a, VectorField::euler(c2), zero2, emb2);
  const TwoFormEval wt = omega_quadrature_tail(a, VectorField::euler(c2), zero2, emb2, 0.5);
  for (const auto& p : cloud(2, 0.6, 6, 21)) {
    CHECK(std::abs(w.matrix(p)(0, 1) - 0.5) < 1e-10);
    CHECK(std::abs(wt.matrix(p)(0, 1) - 0.375) < 1e-10);
  }

  // canonical R^4: alpha from the solve integrates to the standard form
  {
    const Bivector pi = canonical_r4();
    const Transversal nu{pi.chart, 0};
    const OneForm alpha = alpha_for_cosymplectic(pi, nu);
    const VectorField X = sharp_field(pi, alpha);
    const TubularEmbedding emb = linearize(X.as_map(), nu);
    const TwoFormEval om = omega_quadrature(alpha, X, ThreeForm::zero(pi.chart), emb);
    MatrixXd w0 = MatrixXd::Zero(4, 4);
    w0(0, 1) = 1.0;
    w0(2, 3) = 1.0;
    w0 -= MatrixXd(w0.transpose());
    double worst = 0.0;
    for (const auto& p : cloud(4, 0.5, 8, 22))
      worst = std::max(worst, (om.matrix(p) - w0).cwiseAbs().maxCoeff());
    CHECK(worst < 1e-8);
  }

  // pure twist contribution: iota_E of a constant volume form
  {
    const Chart c3 = Chart::ball(3, VectorXd::Zero(3), 1.0);
    const Transversal nu3{c3, 0};
    const TubularEmbedding emb3 = linearize(VectorField::euler(c3).as_map(), nu3);
    ThreeForm eta = ThreeForm::zero(c3);
    eta.set(0, 1, 2, Expr::constant(1.0));
    const OneForm zero1{c3, std::vector<Expr>(3, Expr::constant(0.0))};
    const TwoFormEval om = omega_quadrature(zero1, VectorField::euler(c3), eta, emb3);
    const auto pts = cloud(3, 0.5, 8, 23);
    double worst = 0.0;
    for (const auto& p : pts) {
      const MatrixXd W = om.matrix(p);
      worst = std::max(worst, std::abs(W(1, 2) - p(0) / 3.0));
      worst = std::max(worst, std::abs(W(0, 2) + p(1) / 3.0));
      worst = std::max(worst, std::abs(W(0, 1) - p(2) / 3.0));
    }
    CHECK(worst < 1e-10);
    CHECK(omega_closedness_residual(om, eta, emb3, pts) < 1e-7);
  }

  // node doubling must flag an unresolved rule
  {
    const Bivector pi = so3_bivector();
    const Transversal nu{pi.chart, 1};
    const OneForm alpha = alpha_for_cosymplectic(pi, nu);
    const VectorField X = sharp_field(pi, alpha);
    const TubularEmbedding emb = linearize(X.as_map(), nu);
    QuadratureConfig qc;
    qc.nodes = 1;
    qc.doubling_tol = 1e-15;
    const TwoFormEval bad = omega_quadrature(alpha, X, ThreeForm::zero(pi.chart), emb, qc);
    VectorXd p(3);
    p << 0.1, 0.3, -0.2;
    CHECK_THROWS_AS(bad.matrix(p), NumericError);
  }
}

TEST_CASE("base pullback of the twist") {
  const Chart c4 = Chart::ball(4, VectorXd::Zero(4), 1.0);
  const Transversal nu{c4, 3};
  ThreeForm eta = ThreeForm::zero(c4);
  eta.set(0, 1, 2, Expr::constant(1.0) + Expr::variable(0));
  eta.set(1, 2, 3, Expr::variable(3));
  const ThreeForm base = base_pullback(eta, nu);
  for (const auto& p : cloud(4, 0.5, 10, 31)) {
    CHECK(eval<double>(base.entry(0, 1, 2), p) == doctest::Approx(1.0 + p(0)));
    CHECK(eval<double>(base.entry(1, 2, 3), p) == doctest::Approx(0.0));
  }
  const Transversal low{c4, 2};
  const ThreeForm none = base_pullback(eta, low);
  VectorXd q = VectorXd::Zero(4);
  CHECK(eval<double>(none.entry(0, 1, 2), q) == doctest::Approx(0.0));
}

TEST_CASE("omega boundary behavior along the transversal") {
  const Bivector pi = so3_bivector();
  const Transversal nu{pi.chart, 1};
  const OneForm alpha = alpha_for_cosymplectic(pi, nu);
  const VectorField X = sharp_field(pi, alpha);
  const TubularEmbedding emb = linearize(X.as_map(), nu);
  const TwoFormEval om = omega_quadrature(alpha, X, ThreeForm::zero(pi.chart), emb);
  std::vector<VectorXd> base;
  for (const double y : {0.0, 0.15, -0.15}) {
    VectorXd v(1);
    v << y;
    base.push_back(v);
  }
  const OmegaBoundary b = omega_boundary(om, pi, nu, base);
  CHECK(b.tangent_residual < 1e-8);
  CHECK(b.inverse_residual < 1e-6);
}

TEST_CASE("dirac normal form on an already split product") {
  const Bivector pi = product_bivector();
  const Transversal nu{pi.chart, 2};
  const auto pts = cloud(4, 0.35, 10, 41);
  const DiracFrame E = graph_of_bivector(pi, pts);
  const OneForm alpha = alpha_for_cosymplectic(pi, nu);
  const CourantSection eps{sharp_field(pi, alpha), alpha};
  const SplittingReport rep =
      dirac_normal_form(E, TwistedCourant::untwisted(pi.chart), nu, eps, pts, {}, &pi);
  CHECK(rep.pass);
  REQUIRE(rep.find("normal form principal angle") != nullptr);
  CHECK(rep.find("normal form principal angle")->residual < 1e-10);
  CHECK(rep.find("scaling family independence")->residual < 1e-9);
  CHECK(rep.find("omega closedness")->residual < 1e-8);
}

TEST_CASE("dirac normal form for the rotational bivector") {
  const Bivector pi = so3_bivector();
  const Transversal nu{pi.chart, 1};
  const auto pts = cloud(3, 0.3, 12, 42);
  const DiracFrame E = graph_of_bivector(pi, pts);
  const OneForm alpha = alpha_for_cosymplectic(pi, nu);
  const CourantSection eps{sharp_field(pi, alpha), alpha};
  const SplittingReport rep =
      dirac_normal_form(E, TwistedCourant::untwisted(pi.chart), nu, eps, pts, {}, &pi);
  CHECK(rep.pass);
  CHECK(rep.find("normal form principal angle")->residual < 1e-6);
  CHECK(rep.find("scaling family independence")->residual < 1e-6);
  CHECK(rep.find("omega kernel along the transversal")->residual < 1e-8);
  CHECK(rep.find("omega inverse pairing along the transversal")->residual < 1e-6);
}

TEST_CASE("dirac normal form for a twisted graph") {
  const Chart c3 = Chart::ball(3, VectorXd::Zero(3), 0.9);
  TwoForm w2 = TwoForm::zero(c3);
  w2.set(0, 1, exp(Expr::variable(2)));
  const TwistedCourant bg{c3, exterior_derivative(w2)};
  const auto pts = cloud(3, 0.3, 10, 43);
  const DiracFrame E = graph_of_twoform(w2, bg, pts);
  const Transversal nu{c3, 0};
  const VectorField X = VectorField::euler(c3);
  const CourantSection eps{X, interior_product(X, w2)};
  const SplittingReport rep = dirac_normal_form(E, bg, nu, eps, pts);
  CHECK(rep.pass);
  CHECK(rep.find("normal form principal angle")->residual < 1e-6);
  CHECK(rep.find("omega closedness")->residual < 1e-7);
  CHECK(rep.find("scaling family independence")->residual < 1e-6);
}

TEST_CASE("dirac normal form preconditions") {
  const Bivector pi = so3_bivector();
  const Transversal nu{pi.chart, 1};
  const auto pts = cloud(3, 0.3, 6, 44);
  const DiracFrame E = graph_of_bivector(pi, pts);
  const TwistedCourant bg = TwistedCourant::untwisted(pi.chart);

  // does not vanish along N
  const CourantSection drift =
      CourantSection::of_field(VectorField{pi.chart, {Expr::constant(0.0), Expr::constant(0.3),
                                                      Expr::constant(0.0)}});
  CHECK_THROWS_AS(dirac_normal_form(E, bg, nu, drift, pts), PreconditionError);

  // vanishes but is not a section of the structure
  const CourantSection stray = CourantSection::of_field(
      VectorField{pi.chart, {Expr::constant(0.0), Expr::variable(1), Expr::variable(2)}});
  CHECK_THROWS_AS(dirac_normal_form(E, bg, nu, stray, pts), PreconditionError);

  // in the structure but vanishing to second order: not Euler-like
  const Chart c2 = Chart::ball(2, VectorXd::Zero(2), 1.0);
  Bivector plane = Bivector::zero(c2);
  plane.set(0, 1, Expr::constant(-1.0));
  const auto pts2 = cloud(2, 0.4, 6, 45);
  const DiracFrame P = graph_of_bivector(plane, pts2);
  const OneForm quad{c2, {Expr::constant(0.0), Expr::variable(0) * Expr::variable(0)}};
  const CourantSection flat{sharp_field(plane, quad), quad};
  CHECK_THROWS_AS(dirac_normal_form(P, TwistedCourant::untwisted(c2), Transversal{c2, 0}, flat,
                                    pts2),
                  PreconditionError);
}

TEST_CASE("weinstein split of a product and of the rotational bivector") {
  {
    const Bivector pi = product_bivector();
    const Transversal nu{pi.chart, 2};
    const auto pts = cloud(4, 0.35, 10, 51);
    const SplittingReport rep = weinstein_split(pi, nu, pts);
    CHECK(rep.pass);
    CHECK(rep.find("bivector pushforward")->residual < 1e-8);
    CHECK(rep.find("mixed block vanishing")->residual < 1e-8);
    CHECK(rep.find("transverse block")->residual < 1e-8);
    CHECK(rep.find("symplectic block normalization")->residual < 1e-8);
  }
  {
    const Bivector pi = so3_bivector();
    const Transversal nu{pi.chart, 1};
    const auto pts = cloud(3, 0.3, 12, 52);
    const SplittingReport rep = weinstein_split(pi, nu, pts);
    CHECK(rep.pass);
    CHECK(rep.find("bivector pushforward")->residual < 1e-6);
    CHECK(rep.find("mixed block vanishing")->residual < 1e-6);
    CHECK(rep.find("symplectic block normalization")->residual < 1e-6);

    // the radial Casimir is constant along the symplectic model directions
    const OneForm alpha = alpha_for_cosymplectic(pi, nu);
    const VectorField X = sharp_field(pi, alpha);
    const TubularEmbedding emb = linearize(X.as_map(), nu);
    const SmoothMap psi = emb.psi();
    double worst = 0.0;
    for (const auto& w : pts) {
      const VectorXd m = psi.value(w);
      VectorXd grad(3);
      grad << 2.0 * (1.0 + m(0)), 2.0 * m(1), 2.0 * m(2);
      const MatrixXd K = psi.jacobian(w);
      for (int j = 1; j < 3; ++j) worst = std::max(worst, std::abs(grad.dot(K.col(j))));
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("weinstein split of the heisenberg bivector") {
  const Bivector pi = heisenberg_bivector();
  const Transversal nu{pi.chart, 1};
  const auto pts = cloud(3, 0.25, 10, 53);
  const SplittingReport rep = weinstein_split(pi, nu, pts);
  CHECK(rep.pass);
  CHECK(rep.find("bivector pushforward")->residual < 1e-6);
  CHECK(rep.find("mixed block vanishing")->residual < 1e-6);
  CHECK(rep.find("transverse block")->residual < 1e-6);
  CHECK(rep.find("symplectic block normalization")->residual < 1e-6);
}

TEST_CASE("weinstein split preconditions") {
  const auto pts = cloud(3, 0.3, 6, 54);
  {
    const Bivector pi = so3_bivector();
    CHECK_THROWS_AS(weinstein_split(pi, Transversal{pi.chart, 2}, pts), PreconditionError);
  }
  {
    Bivector line = Bivector::zero(Chart::ball(3, VectorXd::Zero(3), 0.8));
    line.set(1, 2, Expr::variable(0));
    CHECK_THROWS_AS(weinstein_split(line, Transversal{line.chart, 1}, pts), PreconditionError);
  }
  {
    // cosymplectic but not Poisson: rejected by the graph construction
    Bivector bad = Bivector::zero(Chart::ball(3, VectorXd::Zero(3), 0.8));
    bad.set(0, 1, Expr::variable(0));
    bad.set(0, 2, Expr::constant(1.0));
    bad.set(1, 2, Expr::constant(1.0));
    CHECK_THROWS_AS(weinstein_split(bad, Transversal{bad.chart, 1}, pts), PreconditionError);
  }
}

TEST_CASE("gcs normal form for symplectic type and a split product") {
  {
    const Chart c2 = Chart::ball(2, VectorXd::Zero(2), 1.0);
    TwoForm w0 = TwoForm::zero(c2);
    w0.set(0, 1, Expr::constant(1.0));
    const GCSData J = gcs_from_symplectic(w0);
    const auto pts = cloud(2, 0.4, 8, 61);
    const SplittingReport rep = gcs_normal_form(J, Transversal{c2, 0}, pts);
    CHECK(rep.pass);
    CHECK(rep.find("normal form principal angle")->residual < 1e-8);
    CHECK(rep.find("eigen section residual")->residual < 1e-12);
    CHECK(rep.find("gauge form magnitude")->residual < 1e-10);
  }
  {
    const Chart c2 = Chart::unguarded(2);
    const std::vector<Expr> j = {Expr::constant(0.0), Expr::constant(-1.0), Expr::constant(1.0),
                                 Expr::constant(0.0)};
    const GCSData cplx = gcs_from_complex_structure(c2, j);
    TwoForm w0 = TwoForm::zero(c2);
    w0.set(0, 1, Expr::constant(1.0));
    const GCSData sum = gcs_direct_sum(cplx, gcs_from_symplectic(w0));
    const GCSData J{Chart::ball(4, VectorXd::Zero(4), 0.9), sum.J};
    const auto pts = cloud(4, 0.35, 8, 62);
    const SplittingReport rep = gcs_normal_form(J, Transversal{J.chart, 2}, pts);
    CHECK(rep.pass);
    CHECK(rep.find("normal form principal angle")->residual < 1e-8);
    CHECK(rep.find("gauge form magnitude")->residual < 1e-10);
  }
}

TEST_CASE("gcs normal form for a sheared product") {
  const Chart c2 = Chart::unguarded(2);
  const std::vector<Expr> j = {Expr::constant(0.0), Expr::constant(-1.0), Expr::constant(1.0),
                               Expr::constant(0.0)};
  const GCSData cplx = gcs_from_complex_structure(c2, j);
  TwoForm w0 = TwoForm::zero(c2);
  w0.set(0, 1, Expr::constant(1.0));
  const GCSData sum = gcs_direct_sum(cplx, gcs_from_symplectic(w0));
  const GCSData base{Chart::ball(4, VectorXd::Zero(4), 0.9), sum.J};
  TwoForm shear = TwoForm::zero(base.chart);
  shear.set(0, 2, Expr::constant(0.7));
  const GCSData J = bfield(shear, base);
  const auto pts = cloud(4, 0.3, 8, 63);
  CHECK(validate_gcs(J, pts).pass);
  const SplittingReport rep = gcs_normal_form(J, Transversal{J.chart, 2}, pts);
  CHECK(rep.pass);
  CHECK(rep.find("normal form principal angle")->residual < 1e-6);
  CHECK(rep.find("eigen section residual")->residual < 1e-8);
  CHECK(rep.find("gauge form magnitude")->residual > 1e-3);
}

TEST_CASE("gcs normal form rejects a non-cosymplectic transversal") {
  const Chart c2 = Chart::ball(2, VectorXd::Zero(2), 1.0);
  const std::vector<Expr> j = {Expr::constant(0.0), Expr::constant(-1.0), Expr::constant(1.0),
                               Expr::constant(0.0)};
  const GCSData J = gcs_from_complex_structure(c2, j);
  CHECK_THROWS_AS(gcs_normal_form(J, Transversal{c2, 0}, cloud(2, 0.3, 4, 71)),
                  PreconditionError);
}
