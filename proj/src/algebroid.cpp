#include "splitform/algebroid.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "splitform/flow.hpp"

namespace splitform {

namespace {

std::vector<Eigen::VectorXd> base_lattice(int p) {
  std::vector<Eigen::VectorXd> pts;
  pts.push_back(Eigen::VectorXd::Zero(p));
  for (int j = 0; j < p; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(p);
    e[j] = 0.15;
    pts.push_back(e);
    e[j] = -0.15;
    pts.push_back(e);
  }
  return pts;
}

Eigen::MatrixXd anchor_normal_block(const AnchoredBundle& E, const Transversal& nu,
                                    const Eigen::VectorXd& y) {
  const int k = nu.normal_dim();
  const Eigen::VectorXd pt = nu.embed(y, Eigen::VectorXd::Zero(k));
  return E.anchor_matrix(pt).bottomRows(k);
}

std::vector<Expr> field_jacobian_exprs(const VectorField& X) {
  const int n = X.chart.dim;
  std::vector<Expr> dX(static_cast<size_t>(n * n));
  for (int l = 0; l < n; ++l)
    for (int m = 0; m < n; ++m) dX[static_cast<size_t>(l * n + m)] = derivative(X.comps[static_cast<size_t>(l)], m);
  return dX;
}

}  // namespace

// ---------------------------------------------------------------------------
// sections and bundles

Section Section::zero(int rank) {
  Section s;
  s.comps.assign(static_cast<size_t>(rank), Expr::constant(0.0));
  return s;
}

Section Section::basis(int rank, int i) {
  Section s = zero(rank);
  s.comps[static_cast<size_t>(i)] = Expr::constant(1.0);
  return s;
}

Eigen::VectorXd Section::value(const Eigen::VectorXd& p) const {
  Eigen::VectorXd out(rank());
  for (int i = 0; i < rank(); ++i) out[i] = eval(comps[static_cast<size_t>(i)], p);
  return out;
}

AnchoredBundle AnchoredBundle::tangent(const Chart& chart) {
  AnchoredBundle E;
  E.chart = chart;
  E.rank = chart.dim;
  E.anchor.assign(static_cast<size_t>(chart.dim * chart.dim), Expr::constant(0.0));
  for (int i = 0; i < chart.dim; ++i)
    E.anchor[static_cast<size_t>(i * chart.dim + i)] = Expr::constant(1.0);
  return E;
}

const Expr& AnchoredBundle::anchor_entry(int row, int col) const {
  if (row < 0 || row >= chart.dim || col < 0 || col >= rank)
    throw PreconditionError("anchor entry: index out of range");
  return anchor[static_cast<size_t>(row * rank + col)];
}

Eigen::MatrixXd AnchoredBundle::anchor_matrix(const Eigen::VectorXd& p) const {
  Eigen::MatrixXd A(chart.dim, rank);
  for (int l = 0; l < chart.dim; ++l)
    for (int j = 0; j < rank; ++j) A(l, j) = eval(anchor_entry(l, j), p);
  return A;
}

VectorField AnchoredBundle::frame_field(int j) const {
  VectorField X;
  X.chart = chart;
  X.comps.resize(static_cast<size_t>(chart.dim));
  for (int l = 0; l < chart.dim; ++l) X.comps[static_cast<size_t>(l)] = anchor_entry(l, j);
  return X;
}

VectorField AnchoredBundle::anchor_apply(const Section& s) const {
  if (s.rank() != rank) throw PreconditionError("anchor: section rank mismatch");
  VectorField X;
  X.chart = chart;
  X.comps.resize(static_cast<size_t>(chart.dim));
  for (int l = 0; l < chart.dim; ++l) {
    Expr acc;
    for (int j = 0; j < rank; ++j) {
      Expr t = anchor_entry(l, j) * s.comps[static_cast<size_t>(j)];
      acc = acc.valid() ? acc + t : t;
    }
    X.comps[static_cast<size_t>(l)] = acc;
  }
  return X;
}

Expr AnchoredBundle::frame_derivative(int j, const Expr& f) const {
  Expr acc;
  for (int l = 0; l < chart.dim; ++l) {
    Expr t = anchor_entry(l, j) * derivative(f, l);
    acc = acc.valid() ? acc + t : t;
  }
  return acc;
}

void LieAlgebroid::set_structure(int k, int i, int j, const Expr& e) {
  const int r = bundle.rank;
  if (k < 0 || k >= r || i < 0 || i >= r || j < 0 || j >= r || i == j)
    throw PreconditionError("structure function: bad index triple");
  if (structure.empty())
    structure.assign(static_cast<size_t>(detail::pair_count(r) * r), Expr::constant(0.0));
  if (i < j)
    structure[static_cast<size_t>(detail::pair_index(i, j, r) * r + k)] = e;
  else
    structure[static_cast<size_t>(detail::pair_index(j, i, r) * r + k)] = -e;
}

Expr LieAlgebroid::structure_fn(int k, int i, int j) const {
  const int r = bundle.rank;
  if (k < 0 || k >= r || i < 0 || i >= r || j < 0 || j >= r)
    throw PreconditionError("structure function: index out of range");
  if (i == j || structure.empty()) return Expr::constant(0.0);
  if (i < j) return structure[static_cast<size_t>(detail::pair_index(i, j, r) * r + k)];
  return -structure[static_cast<size_t>(detail::pair_index(j, i, r) * r + k)];
}

LieAlgebroid tangent_algebroid(const Chart& chart) {
  LieAlgebroid L;
  L.bundle = AnchoredBundle::tangent(chart);
  L.structure.assign(static_cast<size_t>(detail::pair_count(chart.dim) * chart.dim),
                     Expr::constant(0.0));
  return L;
}

LieAlgebroid cotangent_algebroid(const Bivector& pi) {
  const int n = pi.chart.dim;
  LieAlgebroid L;
  L.bundle.chart = pi.chart;
  L.bundle.rank = n;
  L.bundle.anchor.resize(static_cast<size_t>(n * n));
  for (int b = 0; b < n; ++b)
    for (int a = 0; a < n; ++a) L.bundle.anchor[static_cast<size_t>(b * n + a)] = pi.entry(a, b);
  L.structure.assign(static_cast<size_t>(detail::pair_count(n) * n), Expr::constant(0.0));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = 0; k < n; ++k) L.set_structure(k, i, j, derivative(pi.entry(i, j), k));
  return L;
}

Eigen::VectorXd bracket_apply(const LieAlgebroid& L, const Section& sigma, const Section& tau,
                              const Eigen::VectorXd& p) {
  const AnchoredBundle& E = L.bundle;
  const int r = E.rank;
  if (sigma.rank() != r || tau.rank() != r)
    throw PreconditionError("bracket: section rank mismatch");
  const Eigen::MatrixXd A = E.anchor_matrix(p);
  const Eigen::VectorXd sv = sigma.value(p), tv = tau.value(p);
  const Eigen::VectorXd Xs = A * sv, Xt = A * tv;
  Eigen::VectorXd out(r);
  for (int m = 0; m < r; ++m) {
    double acc = eval_jet(tau.comps[static_cast<size_t>(m)], p, {Xs}).grad[0] -
                 eval_jet(sigma.comps[static_cast<size_t>(m)], p, {Xt}).grad[0];
    for (int i = 0; i < r; ++i)
      for (int j = i + 1; j < r; ++j)
        acc += (sv[i] * tv[j] - sv[j] * tv[i]) * eval(L.structure_fn(m, i, j), p);
    out[m] = acc;
  }
  return out;
}

AlgebroidCheck validate_algebroid(const LieAlgebroid& L, const std::vector<Eigen::VectorXd>& pts,
                                  double tol) {
  const AnchoredBundle& E = L.bundle;
  const int r = E.rank, n = E.chart.dim;
  AlgebroidCheck out;
  for (int i = 0; i < r; ++i) {
    for (int j = i + 1; j < r; ++j) {
      VectorField lhs;
      lhs.chart = E.chart;
      lhs.comps.resize(static_cast<size_t>(n));
      for (int l = 0; l < n; ++l) {
        Expr acc;
        for (int k = 0; k < r; ++k) {
          Expr t = L.structure_fn(k, i, j) * E.anchor_entry(l, k);
          acc = acc.valid() ? acc + t : t;
        }
        lhs.comps[static_cast<size_t>(l)] = acc;
      }
      const VectorField rhs = lie_bracket(E.frame_field(i), E.frame_field(j));
      for (const auto& p : pts) {
        const double res = (lhs.value(p) - rhs.value(p)).cwiseAbs().maxCoeff();
        out.max_anchor_residual = std::max(out.max_anchor_residual, res);
      }
    }
  }
  for (int i = 0; i < r; ++i) {
    for (int j = i + 1; j < r; ++j) {
      for (int k = j + 1; k < r; ++k) {
        for (int m = 0; m < r; ++m) {
          Expr acc;
          const int cyc[3][3] = {{i, j, k}, {j, k, i}, {k, i, j}};
          for (const auto& t : cyc) {
            Expr term = E.frame_derivative(t[0], L.structure_fn(m, t[1], t[2]));
            for (int l = 0; l < r; ++l)
              term = term + L.structure_fn(l, t[1], t[2]) * L.structure_fn(m, t[0], l);
            acc = acc.valid() ? acc + term : term;
          }
          for (const auto& p : pts)
            out.max_jacobi_residual = std::max(out.max_jacobi_residual, std::abs(eval(acc, p)));
        }
      }
    }
  }
  out.pass = out.max_anchor_residual < tol && out.max_jacobi_residual < tol;
  return out;
}

// ---------------------------------------------------------------------------
// transversality and the Euler-like section

bool check_transversal(const AnchoredBundle& E, const Transversal& nu,
                       const std::vector<Eigen::VectorXd>& base_points, double tol) {
  const int n = nu.dim(), p = nu.leaf_dim, r = E.rank;
  if (E.chart.dim != n) throw PreconditionError("transversal check: chart dimension mismatch");
  for (const auto& y : base_points) {
    const Eigen::VectorXd pt = nu.embed(y, Eigen::VectorXd::Zero(n - p));
    Eigen::MatrixXd cat(n, r + p);
    cat.leftCols(r) = E.anchor_matrix(pt);
    cat.rightCols(p).setZero();
    for (int j = 0; j < p; ++j) cat(j, r + j) = 1.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cat);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() ? sv[0] : 0.0;
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
      if (sv[i] > tol * std::max(1.0, smax)) ++rank;
    if (rank < n) return false;
  }
  return true;
}

Section euler_section(const AnchoredBundle& E, const Transversal& nu) {
  const int n = nu.dim(), p = nu.leaf_dim, k = nu.normal_dim(), r = E.rank;
  if (E.chart.dim != n) throw PreconditionError("euler_section: chart dimension mismatch");
  if (!check_transversal(E, nu, base_lattice(p)))
    throw PreconditionError("euler_section: anchor is not transverse to N near the chart center");
  if (k == 0) return Section::zero(r);

  std::vector<Expr> repl(static_cast<size_t>(n));
  for (int i = 0; i < p; ++i) repl[static_cast<size_t>(i)] = Expr::variable(i);
  for (int i = p; i < n; ++i) repl[static_cast<size_t>(i)] = Expr::constant(0.0);
  std::vector<Expr> Ax(static_cast<size_t>(k * r));
  for (int c = 0; c < k; ++c)
    for (int j = 0; j < r; ++j)
      Ax[static_cast<size_t>(c * r + j)] = substitute(E.anchor_entry(p + c, j), repl);

  std::vector<Expr> M(static_cast<size_t>(k * k));
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      Expr acc;
      for (int c = 0; c < r; ++c) {
        Expr t = Ax[static_cast<size_t>(i * r + c)] * Ax[static_cast<size_t>(j * r + c)];
        acc = acc.valid() ? acc + t : t;
      }
      M[static_cast<size_t>(i * k + j)] = acc;
    }
  }
  const Expr det = detail::expr_det(M, k);
  const std::vector<Expr> adj = detail::expr_adjugate(M, k);

  Section eps;
  eps.comps.resize(static_cast<size_t>(r));
  for (int l = 0; l < r; ++l) {
    Expr num;
    for (int j = 0; j < k; ++j) {
      Expr xi;  // det * (j-th minimum-norm preimage)^l
      for (int i = 0; i < k; ++i) {
        Expr t = Ax[static_cast<size_t>(i * r + l)] * adj[static_cast<size_t>(i * k + j)];
        xi = xi.valid() ? xi + t : t;
      }
      Expr term = Expr::variable(p + j) * xi;
      num = num.valid() ? num + term : term;
    }
    eps.comps[static_cast<size_t>(l)] = num / det;
  }
  return eps;
}

// ---------------------------------------------------------------------------
// anchor lifts

AnchorLift::AnchorLift(AnchoredBundle E) : E_(std::move(E)) {
  const int r = E_.rank;
  frame_fields_.reserve(static_cast<size_t>(r));
  for (int j = 0; j < r; ++j) frame_fields_.push_back(E_.frame_field(j));
  torsion_.reserve(static_cast<size_t>(detail::pair_count(r)));
  for (int i = 0; i < r; ++i)
    for (int j = i + 1; j < r; ++j)
      torsion_.push_back(lie_bracket(frame_fields_[static_cast<size_t>(j)],
                                     frame_fields_[static_cast<size_t>(i)]));
}

Eigen::MatrixXd AnchorLift::lifts_matrix(const Eigen::VectorXd& p, double* max_residual) const {
  const int r = E_.rank, n = E_.chart.dim;
  const int np = detail::pair_count(r);
  const Eigen::MatrixXd A = E_.anchor_matrix(p);
  Eigen::MatrixXd T(n, np);
  for (int q = 0; q < np; ++q) T.col(q) = torsion_[static_cast<size_t>(q)].value(p);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
  const Eigen::MatrixXd S = cod.solve(T);
  if (max_residual) *max_residual = np ? (A * S - T).cwiseAbs().maxCoeff() : 0.0;
  return S;
}

Eigen::VectorXd AnchorLift::torsion_lift(const Eigen::VectorXd& p, int i, int j) const {
  const int r = E_.rank;
  if (i < 0 || i >= r || j < 0 || j >= r) throw PreconditionError("torsion lift: index out of range");
  if (i == j) return Eigen::VectorXd::Zero(r);
  const Eigen::MatrixXd S = lifts_matrix(p, nullptr);
  if (i < j) return S.col(detail::pair_index(i, j, r));
  return -S.col(detail::pair_index(j, i, r));
}

double AnchorLift::lift_residual(const Eigen::VectorXd& p) const {
  double res = 0.0;
  lifts_matrix(p, &res);
  return res;
}

Eigen::VectorXd AnchorLift::apply(const Section& sigma, const Section& tau,
                                  const Eigen::VectorXd& p) const {
  const int r = E_.rank;
  if (sigma.rank() != r || tau.rank() != r)
    throw PreconditionError("anchor lift: section rank mismatch");
  const Eigen::MatrixXd A = E_.anchor_matrix(p);
  const Eigen::VectorXd sv = sigma.value(p), tv = tau.value(p);
  const Eigen::VectorXd Xs = A * sv, Xt = A * tv;
  const Eigen::MatrixXd S = lifts_matrix(p, nullptr);
  Eigen::VectorXd out(r);
  for (int m = 0; m < r; ++m)
    out[m] = eval_jet(tau.comps[static_cast<size_t>(m)], p, {Xs}).grad[0] -
             eval_jet(sigma.comps[static_cast<size_t>(m)], p, {Xt}).grad[0];
  for (int i = 0; i < r; ++i)
    for (int j = i + 1; j < r; ++j)
      out -= (sv[i] * tv[j] - sv[j] * tv[i]) * S.col(detail::pair_index(i, j, r));
  return out;
}

Eigen::MatrixXd AnchorLift::frame_operator(const Section& eps, const Eigen::VectorXd& p) const {
  const int r = E_.rank;
  if (eps.rank() != r) throw PreconditionError("frame operator: section rank mismatch");
  const Eigen::MatrixXd A = E_.anchor_matrix(p);
  const Eigen::VectorXd f = eps.value(p);
  const Eigen::MatrixXd S = lifts_matrix(p, nullptr);
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(r, r);
  for (int i = 0; i < r; ++i) {
    const Eigen::VectorXd dir = A.col(i);
    for (int k = 0; k < r; ++k)
      C(k, i) -= eval_jet(eps.comps[static_cast<size_t>(k)], p, {dir}).grad[0];
    for (int j = 0; j < r; ++j) {
      if (j == i) continue;
      if (j < i)
        C.col(i) -= f[j] * S.col(detail::pair_index(j, i, r));
      else
        C.col(i) += f[j] * S.col(detail::pair_index(i, j, r));
    }
  }
  return C;
}

SectionOperator AnchorLift::op() const {
  const AnchorLift self = *this;
  return [self](const Section& s, const Section& t, const Eigen::VectorXd& p) {
    return self.apply(s, t, p);
  };
}

AnchorLift anchor_lift_connection(const AnchoredBundle& E, const std::vector<Eigen::VectorXd>& pts,
                                  double tol) {
  AnchorLift lift(E);
  for (const auto& p : pts) {
    const double res = lift.lift_residual(p);
    if (!(res < tol))
      throw PreconditionError("anchor image is not involutive: torsion lift residual " +
                              std::to_string(res));
  }
  return lift;
}

LiftReport check_lift_contracts(const AnchoredBundle& E, const SectionOperator& D,
                                const std::vector<Section>& sigmas, const std::vector<Section>& taus,
                                const std::vector<Expr>& fs, const std::vector<Eigen::VectorXd>& pts,
                                double tol) {
  LiftReport rep;
  for (const Section& sig : sigmas) {
    const VectorField Xs = E.anchor_apply(sig);
    for (const Section& tau : taus) {
      const VectorField Xt = E.anchor_apply(tau);
      const VectorField lb = lie_bracket(Xs, Xt);
      for (const auto& p : pts) {
        const Eigen::VectorXd base = D(sig, tau, p);
        rep.max_anchor_residual = std::max(
            rep.max_anchor_residual, (E.anchor_matrix(p) * base - lb.value(p)).cwiseAbs().maxCoeff());
        for (const Expr& f : fs) {
          Section ftau, fsig;
          for (const Expr& c : tau.comps) ftau.comps.push_back(f * c);
          for (const Expr& c : sig.comps) fsig.comps.push_back(f * c);
          const double fv = eval(f, p);
          const double df_sig = eval_jet(f, p, {Xs.value(p)}).grad[0];
          const double df_tau = eval_jet(f, p, {Xt.value(p)}).grad[0];
          rep.max_derivation_residual =
              std::max(rep.max_derivation_residual,
                       (D(sig, ftau, p) - fv * base - df_sig * tau.value(p)).cwiseAbs().maxCoeff());
          rep.max_module_residual =
              std::max(rep.max_module_residual,
                       (D(fsig, tau, p) - fv * base + df_tau * sig.value(p)).cwiseAbs().maxCoeff());
        }
      }
    }
  }
  rep.pass = rep.max_derivation_residual < tol && rep.max_anchor_residual < tol &&
             rep.max_module_residual < tol;
  return rep;
}

Eigen::MatrixXd FrameOperatorField::value(const Eigen::VectorXd& p) const {
  Eigen::MatrixXd C(rank, rank);
  for (int k = 0; k < rank; ++k)
    for (int i = 0; i < rank; ++i) C(k, i) = eval(entries[static_cast<size_t>(k * rank + i)], p);
  return C;
}

FrameOperatorField bracket_lift(const LieAlgebroid& L, const Section& eps) {
  const AnchoredBundle& E = L.bundle;
  const int r = E.rank;
  if (eps.rank() != r) throw PreconditionError("bracket lift: section rank mismatch");
  FrameOperatorField C;
  C.rank = r;
  C.entries.resize(static_cast<size_t>(r * r));
  for (int k = 0; k < r; ++k) {
    for (int i = 0; i < r; ++i) {
      Expr acc = -E.frame_derivative(i, eps.comps[static_cast<size_t>(k)]);
      for (int j = 0; j < r; ++j) {
        if (j == i) continue;
        acc = acc + eps.comps[static_cast<size_t>(j)] * L.structure_fn(k, j, i);
      }
      C.entries[static_cast<size_t>(k * r + i)] = acc;
    }
  }
  return C;
}

// ---------------------------------------------------------------------------
// pullback frames

PullbackBundle::PullbackBundle(AnchoredBundle E, Transversal nu, double tol)
    : E_(std::move(E)), nu_(std::move(nu)), tol_(tol) {
  const int n = nu_.dim(), p = nu_.leaf_dim, k = nu_.normal_dim(), r = E_.rank;
  if (E_.chart.dim != n) throw PreconditionError("pullback bundle: chart dimension mismatch");
  fdim_ = r - k;
  if (fdim_ < 0)
    throw PreconditionError("pullback bundle: bundle rank is below the normal dimension");
  if (k == 0) {
    ref_kernel_ = Eigen::MatrixXd::Identity(r, r);
    return;
  }
  for (const auto& y : base_lattice(p)) {
    const Eigen::MatrixXd Ax = anchor_normal_block(E_, nu_, y);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Ax);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() ? sv[0] : 0.0;
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
      if (sv[i] > tol_ * std::max(1.0, smax)) ++rank;
    if (rank != k)
      throw PreconditionError(
          "pullback bundle: normal anchor block loses rank along N (not transverse)");
  }
  if (fdim_ > 0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(anchor_normal_block(E_, nu_, Eigen::VectorXd::Zero(p)),
                                          Eigen::ComputeFullV);
    ref_kernel_ = svd.matrixV().rightCols(fdim_);
  } else {
    ref_kernel_.resize(r, 0);
  }
}

Eigen::MatrixXd PullbackBundle::ie_frame(const Eigen::VectorXd& y) const {
  const int r = E_.rank, k = nu_.normal_dim();
  if (fdim_ == 0) return Eigen::MatrixXd(r, 0);
  if (k == 0) return Eigen::MatrixXd::Identity(r, r);
  const Eigen::MatrixXd Ax = anchor_normal_block(E_, nu_, y);
  const Eigen::MatrixXd G = Ax * Ax.transpose();
  const Eigen::MatrixXd P =
      Eigen::MatrixXd::Identity(r, r) - Ax.transpose() * G.ldlt().solve(Ax);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(P * ref_kernel_);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(r, fdim_);
  const Eigen::MatrixXd R = qr.matrixQR().topRows(fdim_).triangularView<Eigen::Upper>();
  for (int c = 0; c < fdim_; ++c) {
    if (std::abs(R(c, c)) < tol_) throw NumericError("i!E frame degenerates along N");
    if (R(c, c) < 0.0) Q.col(c) = -Q.col(c);
  }
  return Q;
}

Eigen::MatrixXd PullbackBundle::pie_frame(const Eigen::VectorXd& v) const {
  const int n = nu_.dim(), p = nu_.leaf_dim, k = nu_.normal_dim(), r = E_.rank;
  const Eigen::VectorXd y = nu_.base_part(v);
  const Eigen::MatrixXd F = ie_frame(y);
  const Eigen::MatrixXd A = E_.anchor_matrix(nu_.embed(y, Eigen::VectorXd::Zero(k)));
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(r + n, r);
  for (int c = 0; c < fdim_; ++c) {
    out.col(c).head(r) = F.col(c);
    out.col(c).segment(r, p) = (A * F.col(c)).head(p);
  }
  for (int c = 0; c < k; ++c) out(r + p + c, fdim_ + c) = 1.0;
  return out;
}

double PullbackBundle::membership_residual(const Eigen::VectorXd& y, const Eigen::VectorXd& xi,
                                           const Eigen::VectorXd& w) const {
  const int p = nu_.leaf_dim, k = nu_.normal_dim();
  const Eigen::VectorXd ax = E_.anchor_matrix(nu_.embed(y, Eigen::VectorXd::Zero(k))) * xi;
  const double xres = k > 0 ? ax.tail(k).cwiseAbs().maxCoeff() : 0.0;
  const double yres = p > 0 ? (ax.head(p) - w.head(p)).cwiseAbs().maxCoeff() : 0.0;
  return std::max(xres, yres);
}

// ---------------------------------------------------------------------------
// the normal-form bundle map

AlgebroidNormalForm::AlgebroidNormalForm(AnchoredBundle E, Transversal nu, Section eps,
                                         std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> frame_op,
                                         AlgebroidConfig cfg)
    : E_(std::move(E)),
      nu_(std::move(nu)),
      eps_(std::move(eps)),
      frame_op_(std::move(frame_op)),
      cfg_(std::move(cfg)),
      X_(E_.anchor_apply(eps_)),
      dX_(field_jacobian_exprs(X_)),
      emb_(linearize(X_.as_map(), nu_, cfg_.linearize)),
      pb_(E_, nu_, cfg_.frame_tol),
      psi_(emb_.psi()) {}

AlgebroidNormalForm::Transport AlgebroidNormalForm::lambda_transport(const Eigen::VectorXd& m,
                                                                     double t) const {
  const int n = E_.chart.dim, r = E_.rank;
  if (t < 0.0 || t > 1.0) throw PreconditionError("lambda transport: t must lie in [0, 1]");
  const int len = n + r * r + n * n;

  struct Unpacked {
    Eigen::VectorXd base;
    Eigen::MatrixXd A, J;
  };
  auto pack = [&](const Eigen::VectorXd& base, const Eigen::MatrixXd& A, const Eigen::MatrixXd& J) {
    JVecd y(len);
    for (int i = 0; i < n; ++i) y[i] = Jetd(base[i]);
    for (int c = 0; c < r; ++c)
      for (int rr = 0; rr < r; ++rr) y[n + c * r + rr] = Jetd(A(rr, c));
    for (int c = 0; c < n; ++c)
      for (int rr = 0; rr < n; ++rr) y[n + r * r + c * n + rr] = Jetd(J(rr, c));
    return y;
  };
  auto unpack = [&](const JVecd& y) {
    Unpacked u;
    u.base.resize(n);
    u.A.resize(r, r);
    u.J.resize(n, n);
    for (int i = 0; i < n; ++i) u.base[i] = y[i].v;
    for (int c = 0; c < r; ++c)
      for (int rr = 0; rr < r; ++rr) u.A(rr, c) = y[n + c * r + rr].v;
    for (int c = 0; c < n; ++c)
      for (int rr = 0; rr < n; ++rr) u.J(rr, c) = y[n + r * r + c * n + rr].v;
    return u;
  };
  const OdeRhs rhs = [&](double, const JVecd& y) {
    const Unpacked u = unpack(y);
    const Eigen::VectorXd Xv = X_.value(u.base);
    const Eigen::MatrixXd C = frame_op_(u.base);
    Eigen::MatrixXd DX(n, n);
    for (int l = 0; l < n; ++l)
      for (int mm = 0; mm < n; ++mm) DX(l, mm) = eval(dX_[static_cast<size_t>(l * n + mm)], u.base);
    return pack(Xv, (-C * u.A).eval(), (DX * u.J).eval());
  };

  const Eigen::MatrixXd A0 = Eigen::MatrixXd::Identity(r, r);
  const Eigen::MatrixXd J0 = Eigen::MatrixXd::Identity(n, n);
  if (t == 1.0) return Transport{m, A0, J0};
  auto check_inside = [&](const Unpacked& u) {
    if (!E_.chart.contains(u.base)) throw NumericError("fibre transport left the chart domain");
  };
  JVecd cur = pack(m, A0, J0);
  if (t > 0.0) {
    const FlowResult res = integrate_ode(rhs, 0.0, std::log(t), cur, cfg_.transport);
    const Unpacked u = unpack(res.state);
    check_inside(u);
    return Transport{u.base, u.A, u.J};
  }
  double s = 0.0;
  Unpacked prev = unpack(cur);
  while (true) {
    const FlowResult res = integrate_ode(rhs, s, s - 1.0, cur, cfg_.transport);
    cur = res.state;
    s -= 1.0;
    const Unpacked now = unpack(cur);
    check_inside(now);
    const double moved = std::max((now.A - prev.A).cwiseAbs().maxCoeff(),
                                  (now.J - prev.J).cwiseAbs().maxCoeff());
    if (moved < cfg_.converge_tol) return Transport{now.base, now.A, now.J};
    if (s <= -cfg_.s_horizon)
      throw NumericError("fibre transport did not converge within the scaling horizon");
    prev = now;
  }
}

AlgebroidNormalForm::FiberMap AlgebroidNormalForm::fiber_map(const Eigen::VectorXd& v) const {
  FiberMap fm;
  fm.v = v;
  fm.m = psi_.value(v);
  fm.y = nu_.base_part(v);
  const Transport tr = lambda_transport(fm.m, 0.0);
  fm.lambda0 = tr.frame;
  const Eigen::MatrixXd Jpsi = psi_.jacobian(v);
  fm.tpsi_inv_a = Jpsi.partialPivLu().solve(E_.anchor_matrix(fm.m));
  fm.base_drift =
      (tr.base - nu_.embed(fm.y, Eigen::VectorXd::Zero(nu_.normal_dim()))).cwiseAbs().maxCoeff();
  return fm;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> AlgebroidNormalForm::forward(
    const Eigen::VectorXd& v, const Eigen::VectorXd& xi) const {
  if (xi.size() != E_.rank) throw PreconditionError("forward: fibre vector has wrong size");
  const FiberMap fm = fiber_map(v);
  return {fm.lambda0 * xi, fm.tpsi_inv_a * xi};
}

Eigen::VectorXd AlgebroidNormalForm::psi_tilde(const FiberMap& fm, const Eigen::VectorXd& eta,
                                               const Eigen::VectorXd& w) const {
  const int r = E_.rank, n = E_.chart.dim;
  if (eta.size() != r || w.size() != n)
    throw PreconditionError("psi_tilde: fibre-product element has wrong shape");
  Eigen::MatrixXd stack(r + n, r);
  stack.topRows(r) = fm.lambda0;
  stack.bottomRows(n) = fm.tpsi_inv_a;
  Eigen::VectorXd rhs(r + n);
  rhs.head(r) = eta;
  rhs.tail(n) = w;
  return stack.completeOrthogonalDecomposition().solve(rhs);
}

Eigen::VectorXd AlgebroidNormalForm::psi_tilde(const Eigen::VectorXd& v, const Eigen::VectorXd& eta,
                                               const Eigen::VectorXd& w) const {
  return psi_tilde(fiber_map(v), eta, w);
}

double AlgebroidNormalForm::image_residual(const std::vector<Eigen::VectorXd>& vpts) const {
  const int r = E_.rank;
  double worst = 0.0;
  for (const auto& v : vpts) {
    const FiberMap fm = fiber_map(v);
    worst = std::max(worst, fm.base_drift);
    for (int i = 0; i < r; ++i)
      worst = std::max(worst,
                       pb_.membership_residual(fm.y, fm.lambda0.col(i), fm.tpsi_inv_a.col(i)));
  }
  return worst;
}

double AlgebroidNormalForm::round_trip_residual(const std::vector<Eigen::VectorXd>& vpts) const {
  const int r = E_.rank, n = E_.chart.dim;
  double worst = 0.0;
  for (const auto& v : vpts) {
    const FiberMap fm = fiber_map(v);
    const Eigen::MatrixXd B = pb_.pie_frame(v);
    for (int c = 0; c < B.cols(); ++c) {
      const Eigen::VectorXd eta = B.col(c).head(r);
      const Eigen::VectorXd w = B.col(c).tail(n);
      const Eigen::VectorXd xi = psi_tilde(fm, eta, w);
      worst = std::max(worst, (fm.lambda0 * xi - eta).cwiseAbs().maxCoeff());
      worst = std::max(worst, (fm.tpsi_inv_a * xi - w).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

double AlgebroidNormalForm::anchor_residual(const std::vector<Eigen::VectorXd>& vpts,
                                            const std::vector<double>& ts) const {
  double worst = 0.0;
  for (const auto& v : vpts) {
    const Eigen::VectorXd m = psi_.value(v);
    const Eigen::MatrixXd Am = E_.anchor_matrix(m);
    for (const double t : ts) {
      const Transport tr = lambda_transport(m, t);
      const Eigen::MatrixXd At = E_.anchor_matrix(tr.base);
      worst = std::max(worst, (At * tr.frame - tr.base_tangent * Am).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

AlgebroidNormalForm algebroid_normal_form(const LieAlgebroid& L, const Transversal& nu,
                                          const Section& eps, const AlgebroidConfig& cfg) {
  const FrameOperatorField C = bracket_lift(L, eps);
  return AlgebroidNormalForm(L.bundle, nu, eps,
                             [C](const Eigen::VectorXd& p) { return C.value(p); }, cfg);
}

AlgebroidNormalForm algebroid_normal_form(const AnchoredBundle& E, const AnchorLift& lift,
                                          const Transversal& nu, const Section& eps,
                                          const AlgebroidConfig& cfg) {
  const AnchorLift lf = lift;
  const Section ep = eps;
  return AlgebroidNormalForm(
      E, nu, eps, [lf, ep](const Eigen::VectorXd& p) { return lf.frame_operator(ep, p); }, cfg);
}

double bracket_residual(const AlgebroidNormalForm& nf, const LieAlgebroid& L,
                        const std::vector<Eigen::VectorXd>& vpts, double fd_step) {
  const AnchoredBundle& E = L.bundle;
  const Transversal& nu = nf.embedding().transversal();
  const PullbackBundle& pb = nf.pullback();
  const int r = E.rank, n = nu.dim(), p = nu.leaf_dim, k = nu.normal_dim();
  const int fdim = pb.fiber_dim();

  // psi-tilde applied to every product-frame column at v
  auto transported = [&](const Eigen::VectorXd& v, const AlgebroidNormalForm::FiberMap& fm) {
    const Eigen::MatrixXd B = pb.pie_frame(v);
    Eigen::MatrixXd G(r, r);
    for (int c = 0; c < r; ++c)
      G.col(c) = nf.psi_tilde(fm, B.col(c).head(r), B.col(c).tail(n));
    return G;
  };

  // induced structure coefficients on i!E at y for the frame pair (alpha, beta)
  auto induced_structure = [&](const Eigen::VectorXd& y, int alpha, int beta) {
    const Eigen::MatrixXd F = pb.ie_frame(y);
    const Eigen::VectorXd base_pt = nu.embed(y, Eigen::VectorXd::Zero(k));
    const Eigen::MatrixXd A = E.anchor_matrix(base_pt);
    auto dframe = [&](const Eigen::VectorXd& u) {
      const double len = u.norm();
      if (len < 1e-14) return Eigen::MatrixXd::Zero(r, fdim).eval();
      const Eigen::VectorXd uh = u / len;
      return ((pb.ie_frame(y + fd_step * uh) - pb.ie_frame(y - fd_step * uh)) *
              (len / (2.0 * fd_step)))
          .eval();
    };
    const Eigen::VectorXd ba = F.col(alpha), bb = F.col(beta);
    const Eigen::MatrixXd dFa = dframe((A * ba).head(p)), dFb = dframe((A * bb).head(p));
    Eigen::VectorXd br(r);
    for (int m = 0; m < r; ++m) {
      double acc = dFa(m, beta) - dFb(m, alpha);
      for (int a = 0; a < r; ++a)
        for (int b = a + 1; b < r; ++b)
          acc += (ba[a] * bb[b] - ba[b] * bb[a]) * eval(L.structure_fn(m, a, b), base_pt);
      br[m] = acc;
    }
    return F.colPivHouseholderQr().solve(br).eval();
  };

  double worst = 0.0;
  for (const auto& v : vpts) {
    const AlgebroidNormalForm::FiberMap fm = nf.fiber_map(v);
    const Eigen::MatrixXd G = transported(v, fm);
    const Eigen::MatrixXd Am = E.anchor_matrix(fm.m);
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(nf.psi().jacobian(v));

    std::vector<Eigen::MatrixXd> dG(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) {
      Eigen::VectorXd d = lu.solve(Am * G.col(i));
      const double len = d.norm();
      if (len < 1e-14) {
        dG[static_cast<size_t>(i)] = Eigen::MatrixXd::Zero(r, r);
        continue;
      }
      d /= len;
      const Eigen::VectorXd vp = v + fd_step * d, vm = v - fd_step * d;
      const Eigen::MatrixXd Gp = transported(vp, nf.fiber_map(vp));
      const Eigen::MatrixXd Gm = transported(vm, nf.fiber_map(vm));
      dG[static_cast<size_t>(i)] = (Gp - Gm) * (len / (2.0 * fd_step));
    }

    for (int i = 0; i < r; ++i) {
      for (int j = i + 1; j < r; ++j) {
        Eigen::VectorXd br(r);
        for (int m = 0; m < r; ++m) {
          double acc = dG[static_cast<size_t>(i)](m, j) - dG[static_cast<size_t>(j)](m, i);
          for (int a = 0; a < r; ++a)
            for (int b = a + 1; b < r; ++b)
              acc += (G(a, i) * G(b, j) - G(b, i) * G(a, j)) * eval(L.structure_fn(m, a, b), fm.m);
          br[m] = acc;
        }
        Eigen::VectorXd mdl = Eigen::VectorXd::Zero(r);
        if (j < fdim) {
          const Eigen::VectorXd ct = induced_structure(fm.y, i, j);
          const Eigen::VectorXd elem = pb.pie_frame(v).leftCols(fdim) * ct;
          mdl = nf.psi_tilde(fm, elem.head(r), elem.tail(n));
        }
        worst = std::max(worst, (br - mdl).cwiseAbs().maxCoeff());
      }
    }
  }
  return worst;
}

}  // namespace splitform
