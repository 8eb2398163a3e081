#include "splitform/normalform.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <utility>

#include "splitform/quadrature.hpp"

namespace splitform {
namespace {

using Cplx = std::complex<double>;

std::vector<Eigen::VectorXd> base_lattice(const Transversal& nu) {
  const int p = nu.leaf_dim;
  std::vector<Eigen::VectorXd> out;
  out.push_back(Eigen::VectorXd::Zero(p));
  for (int a = 0; a < p; ++a)
    for (const double s : {0.15, -0.15}) {
      Eigen::VectorXd y = Eigen::VectorXd::Zero(p);
      y(a) = s;
      out.push_back(y);
    }
  return out;
}

std::vector<Expr> base_restriction(const Transversal& nu) {
  std::vector<Expr> repl;
  for (int a = 0; a < nu.dim(); ++a)
    repl.push_back(a < nu.leaf_dim ? Expr::variable(a) : Expr::constant(0.0));
  return repl;
}

/// W(b, i) = pi^{(p+i)(p+b)} restricted to the zero section, as expressions
/// in the base variables.  The conormal coefficient matrix of alpha is its
/// inverse.
std::vector<Expr> conormal_matrix(const Bivector& pi, const Transversal& nu) {
  const int p = nu.leaf_dim, k = nu.normal_dim();
  const std::vector<Expr> repl = base_restriction(nu);
  std::vector<Expr> W(static_cast<size_t>(k) * k);
  for (int b = 0; b < k; ++b)
    for (int i = 0; i < k; ++i) W[b * k + i] = substitute(pi.entry(p + i, p + b), repl);
  return W;
}

SmoothMap retraction_map(const Transversal& nu) {
  std::vector<Expr> comps;
  for (int a = 0; a < nu.dim(); ++a)
    comps.push_back(a < nu.leaf_dim ? Expr::variable(a) : Expr::constant(0.0));
  return SmoothMap::from_exprs(std::move(comps), nu.dim());
}

// -------------------------------------------------------------------------
// scaling quadrature

struct ScaledIntegrand {
  SmoothMap psi;
  SmoothMap field;
  Chart guard;
  TwoFormEval th;
  FlowConfig fc;
};

/// States of lambda_tau applied to the seeded jets, one per node.  All nodes
/// of one evaluation lie on a single flow trajectory, integrated leg by leg
/// from tau = 1 downward.
std::vector<JVecd> node_states(const ScaledIntegrand& S, const JVecd& base,
                               const Eigen::VectorXd& taus) {
  std::vector<JVecd> out(taus.size());
  JVecd y = base;
  double s_cur = 0.0;
  for (int q = static_cast<int>(taus.size()) - 1; q >= 0; --q) {
    const double s = std::log(taus(q));
    const FlowResult r = flow(S.field, s - s_cur, y, S.fc, &S.guard);
    if (r.escaped) throw NumericError("omega quadrature: the scaling flow left the chart");
    y = r.state;
    s_cur = s;
    out[q] = y;
  }
  return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> mapped_rule(int n, double t_lo) {
  const GaussLegendre gl = gauss_legendre(n);
  Eigen::VectorXd taus = (t_lo + (1.0 - t_lo) * gl.nodes.array()).matrix();
  Eigen::VectorXd w = ((1.0 - t_lo) * gl.weights.array()).matrix();
  return {std::move(taus), std::move(w)};
}

double accumulate_val(const ScaledIntegrand& S, const JVecd& base, const Eigen::VectorXd& taus,
                      const Eigen::VectorXd& w) {
  const std::vector<JVecd> states = node_states(S, base, taus);
  double acc = 0.0;
  for (int q = 0; q < taus.size(); ++q) {
    const JVecd& J = states[q];
    acc += w(q) / taus(q) * S.th.val(jet_values(J), jet_first(J, 0), jet_first(J, 1));
  }
  return acc;
}

TwoFormEval quadrature_form(const OneForm& alpha, const VectorField& X, const ThreeForm& eta,
                            const TubularEmbedding& emb, double t_lo,
                            const QuadratureConfig& cfg) {
  const int n = alpha.chart.dim;
  if (X.chart.dim != n || eta.chart.dim != n || emb.transversal().dim() != n)
    throw PreconditionError("omega quadrature: dimension mismatch");
  if (cfg.nodes < 1) throw PreconditionError("omega quadrature: needs at least one node");
  if (!(t_lo >= 0.0 && t_lo < 1.0))
    throw PreconditionError("omega quadrature: the lower scale must lie in [0, 1)");

  auto S = std::make_shared<ScaledIntegrand>();
  S->psi = emb.psi();
  S->field = emb.field();
  S->guard = emb.transversal().chart;
  S->th = add(exterior_derivative(alpha), interior_product(X, eta)).evaluator();
  S->fc = cfg.flow;

  const auto [t1, w1] = mapped_rule(cfg.nodes, t_lo);
  const auto [t2, w2] = mapped_rule(2 * cfg.nodes, t_lo);
  const double dtol = cfg.doubling_tol;

  TwoFormEval out;
  out.dim = n;
  const Eigen::VectorXd ta = t1, wa = w1, tb = t2, wb = w2;
  out.val = [S, ta, wa, tb, wb, dtol](const Eigen::VectorXd& p, const Eigen::VectorXd& u,
                                      const Eigen::VectorXd& v) {
    const JVecd base = S->psi.jets(p, {u, v});
    const double coarse = accumulate_val(*S, base, ta, wa);
    const double fine = accumulate_val(*S, base, tb, wb);
    if (std::abs(coarse - fine) > dtol)
      throw NumericError("omega quadrature did not stabilize under node doubling");
    return fine;
  };
  out.d1 = [S, tb, wb](const Eigen::VectorXd& p, const Eigen::VectorXd& u,
                       const Eigen::VectorXd& v, const Eigen::VectorXd& z) {
    const JVecd base = S->psi.jets(p, {u, v, z});
    const std::vector<JVecd> states = node_states(*S, base, tb);
    double acc = 0.0;
    for (int q = 0; q < tb.size(); ++q) {
      const JVecd& J = states[q];
      const Eigen::VectorXd m = jet_values(J);
      const Eigen::VectorXd A = jet_first(J, 0), B = jet_first(J, 1), C = jet_first(J, 2);
      acc += wb(q) / tb(q) *
             (S->th.d1(m, A, B, C) + S->th.val(m, jet_second(J, 0, 2), B) +
              S->th.val(m, A, jet_second(J, 1, 2)));
    }
    return acc;
  };
  return out;
}

struct BoundarySamples {
  std::vector<double> tangent, inverse;
};

BoundarySamples boundary_samples(const TwoFormEval& omega, const Bivector* pi,
                                 const Transversal& nu,
                                 const std::vector<Eigen::VectorXd>& base_points) {
  const int n = nu.dim(), p = nu.leaf_dim, k = nu.normal_dim();
  BoundarySamples out;
  for (const auto& y : base_points) {
    const Eigen::MatrixXd W = omega.matrix(nu.embed(y, Eigen::VectorXd::Zero(k)));
    double tang = 0.0;
    for (int a = 0; a < p; ++a)
      for (int j = 0; j < n; ++j) tang = std::max(tang, std::abs(W(a, j)));
    out.tangent.push_back(tang);
    if (pi != nullptr) {
      const Eigen::MatrixXd defect =
          W.block(p, p, k, k) * ann_pairing(*pi, nu, y) - Eigen::MatrixXd::Identity(k, k);
      out.inverse.push_back(defect.cwiseAbs().maxCoeff());
    }
  }
  return out;
}

std::vector<double> closedness_samples(const TwoFormEval& omega, const ThreeForm& eta,
                                       const TubularEmbedding& emb,
                                       const std::vector<Eigen::VectorXd>& pts) {
  const int n = omega.dim;
  if (n < 3) return std::vector<double>(pts.size(), 0.0);
  const ThreeFormEval dw = exterior_derivative(omega);
  const ThreeFormEval target = pullback(emb.psi(), eta.evaluator());
  const ThreeFormEval base = base_pullback(eta, emb.transversal()).evaluator();
  std::vector<double> out;
  for (const auto& p : pts) {
    double worst = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        for (int c = b + 1; c < n; ++c) {
          const Eigen::VectorXd ea = Eigen::VectorXd::Unit(n, a);
          const Eigen::VectorXd eb = Eigen::VectorXd::Unit(n, b);
          const Eigen::VectorXd ec = Eigen::VectorXd::Unit(n, c);
          const double r =
              dw.val(p, ea, eb, ec) - target.val(p, ea, eb, ec) + base.val(p, ea, eb, ec);
          worst = std::max(worst, std::abs(r));
        }
    out.push_back(worst);
  }
  return out;
}

std::vector<double> angle_samples(const FrameField& A, const FrameField& B,
                                  const std::vector<Eigen::VectorXd>& pts) {
  std::vector<double> out;
  for (const auto& p : pts) out.push_back(principal_angle(A.frame(p), B.frame(p)));
  return out;
}

double section_span_residual(const DiracFrame& E, const CourantSection& s,
                             const std::vector<Eigen::VectorXd>& pts) {
  double worst = 0.0;
  for (const auto& p : pts) {
    const Eigen::MatrixXcd M = E.matrix_c(p);
    const Eigen::VectorXcd v = s.value_c(p);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd> cod(M);
    const Eigen::VectorXcd defect = M * cod.solve(v) - v;
    worst = std::max(worst, defect.cwiseAbs().maxCoeff());
  }
  return worst;
}

Eigen::MatrixXd standard_transverse_bivector(int k) {
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; 2 * i + 1 < k; ++i) {
    Z(2 * i, 2 * i + 1) = -1.0;
    Z(2 * i + 1, 2 * i) = 1.0;
  }
  return Z;
}

/// L with L Pi0 L^T = A for antisymmetric invertible A, via symplectic
/// Gram-Schmidt with deterministic pivoting.
Eigen::MatrixXd darboux_factor(const Eigen::MatrixXd& A) {
  const int k = static_cast<int>(A.rows());
  std::vector<Eigen::VectorXd> pool;
  for (int i = 0; i < k; ++i) pool.push_back(Eigen::VectorXd::Unit(k, i));
  Eigen::MatrixXd B(k, k);
  int col = 0;
  while (!pool.empty()) {
    const Eigen::VectorXd u = pool.front();
    pool.erase(pool.begin());
    int best = -1;
    double bv = 0.0;
    for (size_t i = 0; i < pool.size(); ++i) {
      const double s = std::abs(u.dot(A * pool[i]));
      if (s > bv) {
        bv = s;
        best = static_cast<int>(i);
      }
    }
    if (best < 0 || bv < 1e-12)
      throw NumericError("transverse normalization: the pairing degenerates");
    Eigen::VectorXd v = pool[best] / u.dot(A * pool[best]);
    pool.erase(pool.begin() + best);
    for (auto& w : pool) w += v.dot(A * w) * u - u.dot(A * w) * v;
    B.col(col) = u;
    B.col(col + 1) = v;
    col += 2;
  }
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; 2 * i + 1 < k; ++i) {
    S(2 * i, 2 * i) = 1.0;
    S(2 * i + 1, 2 * i + 1) = -1.0;
  }
  return B.transpose().partialPivLu().solve(S);
}

}  // namespace

void SplittingReport::add(const std::string& name, double residual, double tol) {
  const bool ok = std::isfinite(residual) && residual <= tol;
  checks.push_back({name, residual, tol, ok, {}});
  pass = pass && ok;
}

void SplittingReport::add(const std::string& name, std::vector<double> samples, double tol) {
  double worst = 0.0;
  for (const double s : samples) worst = std::isfinite(s) ? std::max(worst, s) : s;
  add(name, worst, tol);
  checks.back().samples = std::move(samples);
}

const SplitCheck* SplittingReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

Eigen::MatrixXd ann_pairing(const Bivector& pi, const Transversal& nu, const Eigen::VectorXd& y) {
  const int p = nu.leaf_dim, k = nu.normal_dim();
  const Eigen::VectorXd q = nu.embed(y, Eigen::VectorXd::Zero(k));
  return pi.matrix(q).block(p, p, k, k);
}

bool cosymplectic_check(const Bivector& pi, const Transversal& nu,
                        const std::vector<Eigen::VectorXd>& base_points, double cond_guard) {
  const int k = nu.normal_dim();
  if (k == 0) return true;
  for (const auto& y : base_points) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(ann_pairing(pi, nu, y));
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    if (!(smin > 0.0) || smax / smin > cond_guard) return false;
  }
  return true;
}

OneForm alpha_for_cosymplectic(const Bivector& pi, const Transversal& nu) {
  const int n = nu.dim(), p = nu.leaf_dim, k = nu.normal_dim();
  if (pi.chart.dim != n) throw PreconditionError("alpha: bivector and transversal disagree");
  if (k == 0) throw PreconditionError("alpha: the transversal has no normal directions");
  const std::vector<Expr> W = conormal_matrix(pi, nu);
  const Expr det = detail::expr_det(W, k);
  for (const auto& y : base_lattice(nu)) {
    const Eigen::VectorXd q = nu.embed(y, Eigen::VectorXd::Zero(k));
    if (std::abs(eval<double>(det, q)) < 1e-10)
      throw PreconditionError("alpha: the conormal pairing is singular along the transversal");
  }
  const std::vector<Expr> adj = detail::expr_adjugate(W, k);
  std::vector<Expr> comps(n, Expr::constant(0.0));
  for (int i = 0; i < k; ++i) {
    Expr acc = Expr::constant(0.0);
    for (int j = 0; j < k; ++j) acc = acc + (adj[i * k + j] / det) * Expr::variable(p + j);
    comps[p + i] = simplify(acc);
  }
  return OneForm{nu.chart, std::move(comps)};
}

VectorField sharp_field(const Bivector& pi, const OneForm& alpha) {
  const int n = pi.chart.dim;
  if (alpha.chart.dim != n) throw PreconditionError("sharp: chart mismatch");
  std::vector<Expr> comps(n, Expr::constant(0.0));
  for (int b = 0; b < n; ++b) {
    Expr acc = Expr::constant(0.0);
    for (int a = 0; a < n; ++a) acc = acc + alpha.comps[a] * pi.entry(a, b);
    comps[b] = simplify(acc);
  }
  return VectorField{pi.chart, std::move(comps)};
}

ThreeForm base_pullback(const ThreeForm& eta, const Transversal& nu) {
  if (eta.chart.dim != nu.dim()) throw PreconditionError("base pullback: chart mismatch");
  const int p = nu.leaf_dim;
  const std::vector<Expr> repl = base_restriction(nu);
  ThreeForm out = ThreeForm::zero(nu.chart);
  for (int a = 0; a < p; ++a)
    for (int b = a + 1; b < p; ++b)
      for (int c = b + 1; c < p; ++c) out.set(a, b, c, substitute(eta.entry(a, b, c), repl));
  return out;
}

TwoFormEval omega_quadrature(const OneForm& alpha, const VectorField& X, const ThreeForm& eta,
                             const TubularEmbedding& emb, const QuadratureConfig& cfg) {
  return quadrature_form(alpha, X, eta, emb, 0.0, cfg);
}

TwoFormEval omega_quadrature_tail(const OneForm& alpha, const VectorField& X,
                                  const ThreeForm& eta, const TubularEmbedding& emb, double t_lo,
                                  const QuadratureConfig& cfg) {
  return quadrature_form(alpha, X, eta, emb, t_lo, cfg);
}

double omega_closedness_residual(const TwoFormEval& omega, const ThreeForm& eta,
                                 const TubularEmbedding& emb,
                                 const std::vector<Eigen::VectorXd>& pts) {
  double worst = 0.0;
  for (const double r : closedness_samples(omega, eta, emb, pts)) worst = std::max(worst, r);
  return worst;
}

OmegaBoundary omega_boundary(const TwoFormEval& omega, const Bivector& pi, const Transversal& nu,
                             const std::vector<Eigen::VectorXd>& base_points) {
  if (omega.dim != nu.dim() || pi.chart.dim != nu.dim())
    throw PreconditionError("omega boundary: chart mismatch");
  const BoundarySamples s = boundary_samples(omega, &pi, nu, base_points);
  OmegaBoundary out;
  for (const double r : s.tangent) out.tangent_residual = std::max(out.tangent_residual, r);
  for (const double r : s.inverse) out.inverse_residual = std::max(out.inverse_residual, r);
  return out;
}

SplittingReport dirac_normal_form(const DiracFrame& E, const TwistedCourant& bg,
                                  const Transversal& nu, const CourantSection& eps,
                                  const std::vector<Eigen::VectorXd>& pts,
                                  const NormalFormConfig& cfg, const Bivector* pi) {
  const int n = nu.dim();
  if (E.dim() != n || bg.chart.dim != n || eps.dim() != n)
    throw PreconditionError("normal form: dimension mismatch");
  const std::vector<Eigen::VectorXd> lattice = base_lattice(nu);

  double vanish = 0.0;
  for (const auto& y : lattice) {
    const Eigen::VectorXd q = nu.embed(y, Eigen::VectorXd::Zero(nu.normal_dim()));
    vanish = std::max(vanish, eps.value_c(q).cwiseAbs().maxCoeff());
  }
  if (vanish > cfg.section_tol)
    throw PreconditionError("normal form: the section does not vanish along the transversal");
  if (section_span_residual(E, eps, pts) > cfg.section_tol)
    throw PreconditionError("normal form: the section does not lie in the structure");

  const TubularEmbedding emb = linearize(eps.X.as_map(), nu, cfg.lin);
  const TwoFormEval omega = omega_quadrature(eps.alpha, eps.X, bg.eta, emb, cfg.quad);
  const FrameField psiE = pullback_dirac(emb.psi(), nu.chart, E);
  const FrameField model = bfield(omega, pullback_dirac(retraction_map(nu), nu.chart, E));

  SplittingReport rep;
  rep.add("normal form principal angle", angle_samples(psiE, model, pts), cfg.angle_tol);
  rep.add("omega closedness", closedness_samples(omega, bg.eta, emb, pts), cfg.closed_tol);
  const BoundarySamples b = boundary_samples(omega, pi, nu, lattice);
  rep.add("omega kernel along the transversal", b.tangent, cfg.boundary_tangent_tol);
  if (pi != nullptr)
    rep.add("omega inverse pairing along the transversal", b.inverse, cfg.boundary_inverse_tol);

  std::vector<double> family(pts.size(), 0.0);
  for (const double t : cfg.family_ts) {
    if (t == 1.0) continue;
    if (!(t > 0.0 && t < 1.0))
      throw PreconditionError("normal form: family scales must lie in (0, 1]");
    const TwoFormEval wt = omega_quadrature_tail(eps.alpha, eps.X, bg.eta, emb, t, cfg.quad);
    const SmoothMap kt = SmoothMap::linear(nu.dilation_matrix(t));
    const FrameField Ft = bfield(wt, pullback_dirac(kt, nu.chart, psiE));
    const std::vector<double> at = angle_samples(Ft, psiE, pts);
    for (size_t i = 0; i < family.size(); ++i) family[i] = std::max(family[i], at[i]);
  }
  rep.add("scaling family independence", std::move(family), cfg.family_tol);
  return rep;
}

SplittingReport weinstein_split(const Bivector& pi, const Transversal& nu,
                                const std::vector<Eigen::VectorXd>& pts,
                                const NormalFormConfig& cfg) {
  const int n = nu.dim(), p = nu.leaf_dim, k = nu.normal_dim();
  if (pi.chart.dim != n) throw PreconditionError("weinstein split: dimension mismatch");
  if (k % 2 != 0)
    throw PreconditionError("weinstein split: the transversal has odd codimension");
  const std::vector<Eigen::VectorXd> lattice = base_lattice(nu);
  if (!cosymplectic_check(pi, nu, lattice, cfg.cond_guard))
    throw PreconditionError("weinstein split: the transversal is not cosymplectic");

  const DiracFrame graph = graph_of_bivector(pi, pts);
  const OneForm alpha = alpha_for_cosymplectic(pi, nu);
  const VectorField X = sharp_field(pi, alpha);
  const TubularEmbedding emb = linearize(X.as_map(), nu, cfg.lin);
  const ThreeForm zero3 = ThreeForm::zero(nu.chart);
  const TwoFormEval omega = omega_quadrature(alpha, X, zero3, emb, cfg.quad);
  const FrameField model = bfield(omega, pullback_dirac(retraction_map(nu), nu.chart, graph));
  const SmoothMap psi = emb.psi();

  std::vector<double> push, mixed;
  for (const auto& w : pts) {
    const Eigen::MatrixXd Pm = frame_to_bivector(model.frame(w)).real();
    const Eigen::MatrixXd K = psi.jacobian(w);
    const Eigen::MatrixXd defect = K * Pm * K.transpose() - pi.matrix(psi.value(w));
    push.push_back(defect.cwiseAbs().maxCoeff());
    if (p > 0)
      mixed.push_back(std::max(Pm.topRightCorner(p, k).cwiseAbs().maxCoeff(),
                               Pm.bottomLeftCorner(k, p).cwiseAbs().maxCoeff()));
  }

  std::vector<double> trans, darb;
  const Eigen::MatrixXd Pi0 = standard_transverse_bivector(k);
  Eigen::MatrixXd prevL;
  std::unique_ptr<FrameField> FN;
  if (p > 0) {
    std::vector<Expr> comps;
    for (int a = 0; a < n; ++a)
      comps.push_back(a < p ? Expr::variable(a) : Expr::constant(0.0));
    const SmoothMap iembed = SmoothMap::from_exprs(std::move(comps), p);
    FN = std::make_unique<FrameField>(
        pullback_dirac(iembed, Chart::unguarded(p), as_frame_field(graph)));
  }
  for (const auto& y : lattice) {
    const Eigen::VectorXd q = nu.embed(y, Eigen::VectorXd::Zero(k));
    const Eigen::MatrixXd Pm0 = frame_to_bivector(model.frame(q)).real();
    if (FN) {
      const Eigen::MatrixXd PN = frame_to_bivector(FN->frame(y)).real();
      trans.push_back((Pm0.topLeftCorner(p, p) - PN).cwiseAbs().maxCoeff());
    }
    const Eigen::MatrixXd L = darboux_factor(ann_pairing(pi, nu, y));
    if (prevL.size() != 0 && (L - prevL).cwiseAbs().maxCoeff() > 0.5)
      throw NumericError("weinstein split: the transverse normalization is discontinuous");
    prevL = L;
    const Eigen::MatrixXd block = L.partialPivLu().solve(
        L.partialPivLu().solve(Pm0.bottomRightCorner(k, k).transpose()).transpose());
    darb.push_back((block - Pi0).cwiseAbs().maxCoeff());
  }

  SplittingReport rep;
  rep.add("bivector pushforward", std::move(push), cfg.push_tol);
  if (p > 0) {
    rep.add("mixed block vanishing", std::move(mixed), cfg.push_tol);
    rep.add("transverse block", std::move(trans), cfg.push_tol);
  }
  rep.add("symplectic block normalization", std::move(darb), cfg.push_tol);
  rep.add("omega closedness", closedness_samples(omega, zero3, emb, pts), cfg.closed_tol);
  const BoundarySamples b = boundary_samples(omega, &pi, nu, lattice);
  rep.add("omega kernel along the transversal", b.tangent, cfg.boundary_tangent_tol);
  rep.add("omega inverse pairing along the transversal", b.inverse, cfg.boundary_inverse_tol);
  return rep;
}

SplittingReport gcs_normal_form(const GCSData& J, const Transversal& nu,
                                const std::vector<Eigen::VectorXd>& pts,
                                const NormalFormConfig& cfg) {
  const int n = nu.dim();
  if (J.dim() != n) throw PreconditionError("gcs normal form: dimension mismatch");
  const Bivector pi = gcs_induced_poisson(J);
  const std::vector<Eigen::VectorXd> lattice = base_lattice(nu);
  if (!cosymplectic_check(pi, nu, lattice, cfg.cond_guard))
    throw PreconditionError(
        "gcs normal form: the transversal is not cosymplectic for the induced bivector");

  const OneForm alpha = alpha_for_cosymplectic(pi, nu);
  std::vector<Expr> Xc(n, Expr::constant(0.0)), Bc(n, Expr::constant(0.0));
  for (int l = 0; l < n; ++l) {
    Expr acc = Expr::constant(0.0);
    for (int m = 0; m < n; ++m) acc = acc + J.entry(l, n + m) * alpha.comps[m];
    Xc[l] = simplify(acc);
  }
  for (int m = 0; m < n; ++m) {
    Expr acc = Expr::constant(0.0);
    for (int l = 0; l < n; ++l) acc = acc + J.entry(n + m, n + l) * alpha.comps[l];
    Bc[m] = simplify(acc);
  }
  const VectorField X{nu.chart, Xc};
  const OneForm beta{nu.chart, Bc};

  std::vector<double> eig;
  for (const auto& q : pts) {
    Eigen::VectorXcd e(2 * n);
    for (int l = 0; l < n; ++l) e(l) = eval<double>(Xc[l], q);
    for (int m = 0; m < n; ++m)
      e(n + m) = Cplx(eval<double>(Bc[m], q), eval<double>(alpha.comps[m], q));
    const Eigen::VectorXcd defect = J.matrix(q) * e - Cplx(0.0, 1.0) * e;
    eig.push_back(defect.cwiseAbs().maxCoeff());
  }

  const TubularEmbedding emb = linearize(X.as_map(), nu, cfg.lin);
  const ThreeForm zero3 = ThreeForm::zero(nu.chart);
  const TwoFormEval omega = omega_quadrature(alpha, X, zero3, emb, cfg.quad);
  const TwoFormEval gamma = omega_quadrature(beta, X, zero3, emb, cfg.quad);
  const DiracFrame E = gcs_eigenbundle(J);
  const FrameField psiE = pullback_dirac(emb.psi(), nu.chart, E);
  const FrameField model =
      bfield(gamma, bfield_scaled(Cplx(0.0, 1.0), omega,
                                  pullback_dirac(retraction_map(nu), nu.chart, E)));

  for (const auto& q : pts) {
    const Eigen::MatrixXcd M = model.frame(q);
    Eigen::MatrixXcd D(2 * n, 2 * static_cast<int>(M.cols()));
    D << M, M.conjugate();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(D);
    if (svd.singularValues().minCoeff() < 1e-6)
      throw NumericError("gcs normal form: the complex frame degenerates against its conjugate");
  }

  std::vector<double> gmag;
  for (const auto& q : pts) gmag.push_back(gamma.matrix(q).cwiseAbs().maxCoeff());

  SplittingReport rep;
  rep.add("normal form principal angle", angle_samples(psiE, model, pts), cfg.angle_tol);
  rep.add("eigen section residual", std::move(eig), cfg.eigen_tol);
  rep.add("omega closedness", closedness_samples(omega, zero3, emb, pts), cfg.closed_tol);
  const BoundarySamples b = boundary_samples(omega, &pi, nu, lattice);
  rep.add("omega kernel along the transversal", b.tangent, cfg.boundary_tangent_tol);
  rep.add("omega inverse pairing along the transversal", b.inverse, cfg.boundary_inverse_tol);
  rep.add("gauge form magnitude", std::move(gmag), std::numeric_limits<double>::infinity());
  return rep;
}

}  // namespace splitform
