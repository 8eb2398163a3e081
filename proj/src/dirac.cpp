#include "splitform/dirac.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "splitform/quadrature.hpp"

namespace splitform {

namespace {

using Cplx = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

VectorXcd eval_comps_c(const std::vector<Expr>& comps, const VectorXd& p) {
  const Eigen::VectorXcd vars = p.cast<Cplx>();
  VectorXcd out(static_cast<Eigen::Index>(comps.size()));
  for (size_t i = 0; i < comps.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = eval<Cplx>(comps[i], vars);
  return out;
}

Cplx eval_c(const Expr& e, const VectorXd& p) { return eval<Cplx>(e, p.cast<Cplx>().eval()); }

int numeric_rank(const Eigen::JacobiSVD<MatrixXcd>& svd, double tol) {
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv[0] : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > tol * std::max(1.0, smax)) ++rank;
  return rank;
}

MatrixXcd thin_q(const MatrixXcd& M) {
  Eigen::HouseholderQR<MatrixXcd> qr(M);
  return qr.householderQ() * MatrixXcd::Identity(M.rows(), M.cols());
}

/// Distance of b to the column span of M (infinity norm of the defect).
double span_residual(const MatrixXcd& M, const VectorXcd& b) {
  const VectorXcd c = M.completeOrthogonalDecomposition().solve(b);
  return (M * c - b).cwiseAbs().maxCoeff();
}

}  // namespace

// ---------------------------------------------------------------------------
// sections and brackets

CourantSection CourantSection::zero(const Chart& chart) {
  CourantSection s;
  s.X.chart = chart;
  s.X.comps.assign(static_cast<size_t>(chart.dim), Expr::constant(0.0));
  s.alpha.chart = chart;
  s.alpha.comps.assign(static_cast<size_t>(chart.dim), Expr::constant(0.0));
  return s;
}

CourantSection CourantSection::of_field(const VectorField& X) {
  CourantSection s = zero(X.chart);
  s.X = X;
  return s;
}

CourantSection CourantSection::of_form(const OneForm& a) {
  CourantSection s = zero(a.chart);
  s.alpha = a;
  return s;
}

VectorXcd CourantSection::value_c(const VectorXd& p) const {
  const int n = dim();
  VectorXcd out(2 * n);
  out.head(n) = eval_comps_c(X.comps, p);
  out.tail(n) = eval_comps_c(alpha.comps, p);
  return out;
}

TwistedCourant TwistedCourant::untwisted(const Chart& chart) {
  return TwistedCourant{chart, ThreeForm::zero(chart)};
}

double twist_closedness_residual(const TwistedCourant& bg, const std::vector<VectorXd>& pts) {
  const int n = bg.chart.dim;
  if (n < 4) return 0.0;
  double worst = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (int c = b + 1; c < n; ++c)
        for (int d = c + 1; d < n; ++d) {
          const Expr comp = derivative(bg.eta.entry(b, c, d), a) -
                            derivative(bg.eta.entry(a, c, d), b) +
                            derivative(bg.eta.entry(a, b, d), c) -
                            derivative(bg.eta.entry(a, b, c), d);
          for (const auto& p : pts)
            worst = std::max(worst, std::abs(eval_c(comp, p)));
        }
  return worst;
}

Expr pairing(const CourantSection& s1, const CourantSection& s2) {
  const int n = s1.dim();
  if (n != s2.dim()) throw PreconditionError("pairing: chart mismatch");
  Expr acc;
  for (int l = 0; l < n; ++l) {
    const Expr t = s1.alpha.comps[static_cast<size_t>(l)] * s2.X.comps[static_cast<size_t>(l)] +
                   s2.alpha.comps[static_cast<size_t>(l)] * s1.X.comps[static_cast<size_t>(l)];
    acc = acc.valid() ? acc + t : t;
  }
  return acc;
}

CourantSection courant_bracket(const CourantSection& s1, const CourantSection& s2,
                               const TwistedCourant& bg) {
  const int n = s1.dim();
  if (n != s2.dim() || n != bg.chart.dim)
    throw PreconditionError("courant bracket: chart mismatch");
  CourantSection out;
  out.X = lie_bracket(s1.X, s2.X);

  // L_{X1} a2 = d(a2(X1)) + iota_{X1} d a2
  Expr a2x1;
  for (int l = 0; l < n; ++l) {
    const Expr t = s2.alpha.comps[static_cast<size_t>(l)] * s1.X.comps[static_cast<size_t>(l)];
    a2x1 = a2x1.valid() ? a2x1 + t : t;
  }
  const OneForm lie_term = interior_product(s1.X, exterior_derivative(s2.alpha));
  const OneForm da1_term = interior_product(s2.X, exterior_derivative(s1.alpha));
  const OneForm eta_term = interior_product(s1.X, interior_product(s2.X, bg.eta));

  out.alpha.chart = s1.alpha.chart;
  out.alpha.comps.resize(static_cast<size_t>(n));
  for (int m = 0; m < n; ++m)
    out.alpha.comps[static_cast<size_t>(m)] =
        derivative(a2x1, m) + lie_term.comps[static_cast<size_t>(m)] -
        da1_term.comps[static_cast<size_t>(m)] + eta_term.comps[static_cast<size_t>(m)];
  return out;
}

CourantSection bfield(const TwoForm& omega, const CourantSection& s) {
  CourantSection out = s;
  const OneForm shift = interior_product(s.X, omega);
  for (size_t m = 0; m < out.alpha.comps.size(); ++m)
    out.alpha.comps[m] = out.alpha.comps[m] + shift.comps[m];
  return out;
}

MatrixXcd DiracFrame::matrix_c(const VectorXd& p) const {
  const int n = dim(), r = rank();
  MatrixXcd M(2 * n, r);
  for (int c = 0; c < r; ++c) M.col(c) = sections[static_cast<size_t>(c)].value_c(p);
  return M;
}

DiracFrame bfield(const TwoForm& omega, const DiracFrame& E) {
  DiracFrame out = E;
  for (auto& s : out.sections) s = bfield(omega, s);
  return out;
}

DiracReport validate_dirac(const DiracFrame& E, const TwistedCourant& bg,
                           const std::vector<VectorXd>& pts, double tol, bool check_split) {
  const int n = E.dim(), r = E.rank();
  DiracReport rep;
  rep.min_rank_gap = std::numeric_limits<double>::infinity();
  rep.min_split_gap = std::numeric_limits<double>::infinity();

  std::vector<Expr> pairings;
  for (int i = 0; i < r; ++i)
    for (int j = i; j < r; ++j)
      pairings.push_back(pairing(E.sections[static_cast<size_t>(i)],
                                 E.sections[static_cast<size_t>(j)]));
  std::vector<CourantSection> brackets;
  for (int i = 0; i < r; ++i)
    for (int j = i + 1; j < r; ++j)
      brackets.push_back(courant_bracket(E.sections[static_cast<size_t>(i)],
                                         E.sections[static_cast<size_t>(j)], bg));

  for (const auto& p : pts) {
    for (const Expr& pr : pairings)
      rep.max_pairing_residual = std::max(rep.max_pairing_residual, std::abs(eval_c(pr, p)));
    const MatrixXcd M = E.matrix_c(p);
    Eigen::JacobiSVD<MatrixXcd> svd(M);
    if (svd.singularValues().size() >= r)
      rep.min_rank_gap = std::min(rep.min_rank_gap, svd.singularValues()[r - 1]);
    for (const CourantSection& br : brackets)
      rep.max_involutivity_residual =
          std::max(rep.max_involutivity_residual, span_residual(M, br.value_c(p)));
    if (check_split) {
      MatrixXcd both(2 * n, 2 * r);
      both.leftCols(r) = M;
      both.rightCols(r) = M.conjugate();
      Eigen::JacobiSVD<MatrixXcd> dsvd(both);
      rep.min_split_gap =
          std::min(rep.min_split_gap, dsvd.singularValues()[dsvd.singularValues().size() - 1]);
    }
  }
  rep.pass = rep.max_pairing_residual < tol && rep.min_rank_gap > tol &&
             rep.max_involutivity_residual < tol &&
             (!check_split || rep.min_split_gap > tol);
  return rep;
}

DiracFrame graph_of_bivector(const Bivector& pi, const std::vector<VectorXd>& pts, double tol) {
  const Trivector J = jacobiator(pi);
  for (const auto& p : pts)
    if (!(J.max_abs(p) < tol))
      throw PreconditionError("graph of bivector: jacobiator does not vanish at a sample point");
  const int n = pi.chart.dim;
  DiracFrame E;
  E.chart = pi.chart;
  for (int a = 0; a < n; ++a) {
    CourantSection s = CourantSection::zero(pi.chart);
    for (int b = 0; b < n; ++b) s.X.comps[static_cast<size_t>(b)] = pi.entry(a, b);
    s.alpha.comps[static_cast<size_t>(a)] = Expr::constant(1.0);
    E.sections.push_back(s);
  }
  return E;
}

DiracFrame graph_of_twoform(const TwoForm& omega, const TwistedCourant& bg,
                            const std::vector<VectorXd>& pts, double tol) {
  ThreeForm minus_eta = bg.eta;
  for (auto& e : minus_eta.packed) e = -e;
  const ThreeForm defect = add(exterior_derivative(omega), minus_eta);
  const int n = omega.chart.dim;
  for (const auto& p : pts)
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        for (int k = j + 1; k < n; ++k)
          if (!(std::abs(eval_c(defect.entry(i, j, k), p)) < tol))
            throw PreconditionError(
                "graph of two-form: the twist does not match d omega at a sample point");
  DiracFrame E;
  E.chart = omega.chart;
  for (int a = 0; a < n; ++a) {
    CourantSection s = CourantSection::zero(omega.chart);
    s.X.comps[static_cast<size_t>(a)] = Expr::constant(1.0);
    for (int m = 0; m < n; ++m)
      if (m != a) s.alpha.comps[static_cast<size_t>(m)] = omega.entry(a, m);
    E.sections.push_back(s);
  }
  return E;
}

// ---------------------------------------------------------------------------
// pointwise frames

FrameField as_frame_field(const DiracFrame& E) {
  FrameField f;
  f.chart = E.chart;
  f.rank = E.rank();
  f.frame = [E](const VectorXd& p) { return E.matrix_c(p); };
  return f;
}

FrameField pullback_dirac(const SmoothMap& phi, const Chart& source, const FrameField& E,
                          double tol) {
  const int ns = source.dim;
  const int nt = E.chart.dim;
  const int r = E.rank;
  FrameField out;
  out.chart = source;
  out.rank = ns;
  out.frame = [phi, E, ns, nt, r, tol](const VectorXd& p) {
    const VectorXd q = phi.value(p);
    const MatrixXd J = phi.jacobian(p);
    const MatrixXcd M = E.frame(q);
    const MatrixXcd V = M.topRows(nt), U = M.bottomRows(nt);
    MatrixXcd B(nt, ns + r);
    B.leftCols(ns) = J.cast<Cplx>();
    B.rightCols(r) = -V;
    Eigen::JacobiSVD<MatrixXcd> svd(B, Eigen::ComputeFullV);
    const int rank = numeric_rank(svd, tol);
    const int kdim = ns + r - rank;
    if (kdim != ns)
      throw PreconditionError("dirac pullback: transversality fails at a sample point");
    const MatrixXcd K = svd.matrixV().rightCols(kdim);
    MatrixXcd res(2 * ns, ns);
    res.topRows(ns) = K.topRows(ns);
    res.bottomRows(ns) = J.transpose().cast<Cplx>() * (U * K.bottomRows(r));
    return res;
  };
  return out;
}

FrameField pullback_dirac(const SmoothMap& phi, const Chart& source, const DiracFrame& E,
                          double tol) {
  return pullback_dirac(phi, source, as_frame_field(E), tol);
}

namespace {

FrameField gauged(const FrameField& E,
                  std::function<MatrixXcd(const VectorXd&)> shift_matrix) {
  const int n = E.chart.dim;
  FrameField out = E;
  out.frame = [E, shift_matrix, n](const VectorXd& p) {
    MatrixXcd M = E.frame(p);
    M.bottomRows(n) += shift_matrix(p).transpose() * M.topRows(n);
    return M;
  };
  return out;
}

}  // namespace

FrameField bfield(const TwoForm& omega, const FrameField& E) {
  return gauged(E, [omega](const VectorXd& p) { return omega.matrix(p).cast<Cplx>().eval(); });
}

FrameField bfield(const TwoFormEval& omega, const FrameField& E) {
  return bfield_scaled(Cplx(1.0, 0.0), omega, E);
}

FrameField bfield_scaled(Cplx scale, const TwoFormEval& omega, const FrameField& E) {
  return gauged(E, [scale, omega](const VectorXd& p) {
    return (scale * omega.matrix(p).cast<Cplx>()).eval();
  });
}

double principal_angle(const MatrixXcd& A, const MatrixXcd& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw PreconditionError("principal angle: frame shapes differ");
  const MatrixXcd Qa = thin_q(A), Qb = thin_q(B);
  const MatrixXcd C = Qa.adjoint() * Qb;
  Eigen::JacobiSVD<MatrixXcd> svd(C);
  const double c = std::clamp(svd.singularValues().minCoeff(), -1.0, 1.0);
  if (c < 0.99) return std::acos(c);
  // cosine formulation loses half the digits near zero; switch to sines
  Eigen::JacobiSVD<MatrixXcd> ssvd(Qb - Qa * C);
  const double s = std::clamp(ssvd.singularValues().maxCoeff(), 0.0, 1.0);
  return std::asin(s);
}

double frame_distance(const FrameField& A, const FrameField& B, const std::vector<VectorXd>& pts) {
  double worst = 0.0;
  for (const auto& p : pts) worst = std::max(worst, principal_angle(A.frame(p), B.frame(p)));
  return worst;
}

MatrixXcd frame_to_bivector(const MatrixXcd& M, double tol) {
  const int n = static_cast<int>(M.rows()) / 2;
  const MatrixXcd V = M.topRows(n), U = M.bottomRows(n);
  Eigen::JacobiSVD<MatrixXcd> svd(U);
  if (svd.singularValues().minCoeff() < tol)
    throw NumericError("frame is not the graph of a bivector");
  return (V * U.completeOrthogonalDecomposition().pseudoInverse()).transpose();
}

// ---------------------------------------------------------------------------
// generalized complex structures

const Expr& GCSData::entry(int row, int col) const {
  const int d = 2 * chart.dim;
  if (row < 0 || row >= d || col < 0 || col >= d)
    throw PreconditionError("structure matrix: index out of range");
  return J[static_cast<size_t>(row * d + col)];
}

MatrixXd GCSData::matrix(const VectorXd& p) const {
  const int d = 2 * chart.dim;
  MatrixXd M(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) M(r, c) = eval(entry(r, c), p);
  return M;
}

GCSReport validate_gcs(const GCSData& J, const std::vector<VectorXd>& pts, double tol) {
  const int n = J.dim();
  GCSReport rep;
  MatrixXd P = MatrixXd::Zero(2 * n, 2 * n);
  P.topRightCorner(n, n).setIdentity();
  P.bottomLeftCorner(n, n).setIdentity();
  for (const auto& p : pts) {
    const MatrixXd M = J.matrix(p);
    rep.max_square_residual = std::max(
        rep.max_square_residual,
        (M * M + MatrixXd::Identity(2 * n, 2 * n)).cwiseAbs().maxCoeff());
    rep.max_orthogonality_residual = std::max(
        rep.max_orthogonality_residual, (M.transpose() * P * M - P).cwiseAbs().maxCoeff());
  }
  rep.eigenframe = validate_dirac(gcs_eigenbundle(J), TwistedCourant::untwisted(J.chart), pts,
                                  tol, true);
  rep.pass = rep.max_square_residual < tol && rep.max_orthogonality_residual < tol &&
             rep.eigenframe.pass;
  return rep;
}

DiracFrame gcs_eigenbundle(const GCSData& J) {
  const int n = J.dim();
  const MatrixXd J0 = J.matrix(VectorXd::Zero(n));
  MatrixXcd G(2 * n, 2 * n);
  G = MatrixXcd::Identity(2 * n, 2 * n) - Cplx(0.0, 1.0) * J0.cast<Cplx>();
  Eigen::ColPivHouseholderQR<MatrixXcd> qr(G);
  const auto perm = qr.colsPermutation().indices();

  DiracFrame E;
  E.chart = J.chart;
  E.mode = DiracFrame::Mode::kComplex;
  const Expr minus_i = Expr::constant(Cplx(0.0, -1.0));
  for (int c = 0; c < n; ++c) {
    const int a = perm[c];
    CourantSection s = CourantSection::zero(J.chart);
    for (int l = 0; l < n; ++l) {
      s.X.comps[static_cast<size_t>(l)] = minus_i * J.entry(l, a);
      s.alpha.comps[static_cast<size_t>(l)] = minus_i * J.entry(n + l, a);
    }
    if (a < n)
      s.X.comps[static_cast<size_t>(a)] = s.X.comps[static_cast<size_t>(a)] + Expr::constant(1.0);
    else
      s.alpha.comps[static_cast<size_t>(a - n)] =
          s.alpha.comps[static_cast<size_t>(a - n)] + Expr::constant(1.0);
    E.sections.push_back(s);
  }
  return E;
}

Bivector gcs_induced_poisson(const GCSData& J) {
  const int n = J.dim();
  Bivector pi = Bivector::zero(J.chart);
  for (int i = 0; i < n; ++i)
    for (int l = i + 1; l < n; ++l)
      pi.set(i, l, Expr::constant(0.5) * (J.entry(l, n + i) - J.entry(i, n + l)));
  return pi;
}

GCSData gcs_from_symplectic(const TwoForm& omega) {
  const int n = omega.chart.dim;
  std::vector<Expr> Wt(static_cast<size_t>(n * n));  // transpose of the form matrix
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) Wt[static_cast<size_t>(r * n + c)] = omega.entry(c, r);
  const Expr det = detail::expr_det(Wt, n);
  const std::vector<Expr> adj = detail::expr_adjugate(Wt, n);

  GCSData J;
  J.chart = omega.chart;
  J.J.assign(static_cast<size_t>(4 * n * n), Expr::constant(0.0));
  const int d = 2 * n;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      J.J[static_cast<size_t>(r * d + (n + c))] = adj[static_cast<size_t>(r * n + c)] / det;
      J.J[static_cast<size_t>((n + r) * d + c)] = -Wt[static_cast<size_t>(r * n + c)];
    }
  return J;
}

GCSData gcs_from_complex_structure(const Chart& chart, const std::vector<Expr>& j) {
  const int n = chart.dim;
  if (static_cast<int>(j.size()) != n * n)
    throw PreconditionError("complex structure: matrix size mismatch");
  GCSData J;
  J.chart = chart;
  J.J.assign(static_cast<size_t>(4 * n * n), Expr::constant(0.0));
  const int d = 2 * n;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      J.J[static_cast<size_t>(r * d + c)] = -j[static_cast<size_t>(r * n + c)];
      J.J[static_cast<size_t>((n + r) * d + (n + c))] = j[static_cast<size_t>(c * n + r)];
    }
  return J;
}

GCSData gcs_direct_sum(const GCSData& a, const GCSData& b) {
  const int na = a.dim(), nb = b.dim(), n = na + nb;
  std::vector<Expr> repl(static_cast<size_t>(nb));
  for (int i = 0; i < nb; ++i) repl[static_cast<size_t>(i)] = Expr::variable(na + i);

  GCSData J;
  J.chart = Chart::unguarded(n);
  J.J.assign(static_cast<size_t>(4 * n * n), Expr::constant(0.0));
  const int d = 2 * n;
  auto remap_a = [&](int idx) { return idx < na ? idx : n + (idx - na); };
  auto remap_b = [&](int idx) { return idx < nb ? na + idx : n + na + (idx - nb); };
  for (int r = 0; r < 2 * na; ++r)
    for (int c = 0; c < 2 * na; ++c)
      J.J[static_cast<size_t>(remap_a(r) * d + remap_a(c))] = a.entry(r, c);
  for (int r = 0; r < 2 * nb; ++r)
    for (int c = 0; c < 2 * nb; ++c)
      J.J[static_cast<size_t>(remap_b(r) * d + remap_b(c))] = substitute(b.entry(r, c), repl);
  return J;
}

GCSData bfield(const TwoForm& omega, const GCSData& Jin) {
  const int n = Jin.dim(), d = 2 * n;
  // R J R^{-1} with R = [[I, 0], [W^T, I]]
  std::vector<Expr> R(static_cast<size_t>(d * d), Expr::constant(0.0));
  std::vector<Expr> Rinv(static_cast<size_t>(d * d), Expr::constant(0.0));
  for (int i = 0; i < d; ++i) {
    R[static_cast<size_t>(i * d + i)] = Expr::constant(1.0);
    Rinv[static_cast<size_t>(i * d + i)] = Expr::constant(1.0);
  }
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const Expr wt = omega.entry(c, r);
      R[static_cast<size_t>((n + r) * d + c)] = wt;
      Rinv[static_cast<size_t>((n + r) * d + c)] = -wt;
    }
  auto mul = [d](const std::vector<Expr>& A, const std::vector<Expr>& B) {
    std::vector<Expr> C(static_cast<size_t>(d * d));
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) {
        Expr acc;
        for (int k = 0; k < d; ++k) {
          const Expr t =
              A[static_cast<size_t>(r * d + k)] * B[static_cast<size_t>(k * d + c)];
          acc = acc.valid() ? acc + t : t;
        }
        C[static_cast<size_t>(r * d + c)] = acc;
      }
    return C;
  };
  GCSData out;
  out.chart = Jin.chart;
  out.J = mul(mul(R, Jin.J), Rinv);
  return out;
}

// ---------------------------------------------------------------------------
// gauge flow

namespace {

MatrixXd gamma_matrix(const SmoothMap& Xmap, const TwoForm& theta, double s, const VectorXd& p,
                      const GaugeFlowConfig& cfg, const Chart& guard) {
  const int n = static_cast<int>(p.size());
  const GaussLegendre gl = gauss_legendre(cfg.nodes);
  MatrixXd G = MatrixXd::Zero(n, n);
  for (int q = 0; q < gl.nodes.size(); ++q) {
    const double u = s * gl.nodes[q];
    const VectorXd z = flow_point(Xmap, u, p, cfg.flow, &guard);
    const MatrixXd K = flow_jacobian(Xmap, u, p, cfg.flow);
    G += s * gl.weights[q] * (K.transpose() * theta.matrix(z) * K);
  }
  return G;
}

}  // namespace

MatrixXd gauge_form(const CourantSection& sigma, double s, const TwistedCourant& bg,
                    const VectorXd& p, const GaugeFlowConfig& cfg) {
  const TwoForm theta =
      add(exterior_derivative(sigma.alpha), interior_product(sigma.X, bg.eta));
  return gamma_matrix(sigma.X.as_map(), theta, s, p, cfg, bg.chart);
}

double gauge_flow_check(const CourantSection& sigma, double s, const DiracFrame& E,
                        const TwistedCourant& bg, const std::vector<VectorXd>& pts,
                        const GaugeFlowConfig& cfg) {
  const int n = E.dim();
  for (const auto& p : pts)
    if (!(span_residual(E.matrix_c(p), sigma.value_c(p)) < cfg.section_tol))
      throw PreconditionError("gauge flow: the section does not lie in the Dirac structure");

  const TwoForm theta =
      add(exterior_derivative(sigma.alpha), interior_product(sigma.X, bg.eta));
  const SmoothMap Xmap = sigma.X.as_map();

  double worst = 0.0;
  for (const auto& q : pts) {
    // the flow map of the family is the backward solution; its source point
    // sits one forward step along the standard flow
    const VectorXd m = flow_point(Xmap, s, q, cfg.flow, &bg.chart);
    const MatrixXd K = flow_jacobian(Xmap, s, q, cfg.flow);
    const MatrixXcd Mm = E.matrix_c(m);
    const Eigen::PartialPivLU<MatrixXd> lu(K);
    MatrixXcd transported(2 * n, E.rank());
    transported.topRows(n) = lu.solve(Mm.topRows(n).real()) +
                             Cplx(0.0, 1.0) * lu.solve(Mm.topRows(n).imag());
    transported.bottomRows(n) = K.transpose().cast<Cplx>() * Mm.bottomRows(n);

    const MatrixXd G = gamma_matrix(Xmap, theta, s, q, cfg, bg.chart);
    MatrixXcd gauged_frame = E.matrix_c(q);
    gauged_frame.bottomRows(n) += G.transpose().cast<Cplx>() * gauged_frame.topRows(n);

    worst = std::max(worst, principal_angle(transported, gauged_frame));
  }
  return worst;
}

}  // namespace splitform
