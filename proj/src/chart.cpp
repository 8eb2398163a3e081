#include "splitform/chart.hpp"

#include <cmath>

namespace splitform {

// ---------------------------------------------------------------------------
// Chart

Chart Chart::unguarded(int dim) {
  if (dim <= 0) throw PreconditionError("chart dimension must be positive");
  Chart c;
  c.dim = dim;
  return c;
}

Chart Chart::ball(int dim, Eigen::VectorXd center, double radius) {
  Chart c = unguarded(dim);
  if (center.size() != dim) throw PreconditionError("guard center dimension mismatch");
  if (!(radius > 0.0)) throw PreconditionError("guard radius must be positive");
  c.guard = Guard::kBall;
  c.center = std::move(center);
  c.radius = radius;
  return c;
}

Chart Chart::box(Eigen::VectorXd lo, Eigen::VectorXd hi) {
  if (lo.size() != hi.size() || lo.size() == 0)
    throw PreconditionError("box guard bounds mismatch");
  Chart c = unguarded(static_cast<int>(lo.size()));
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (!(lo[i] < hi[i])) throw PreconditionError("box guard bounds must satisfy lo < hi");
  c.guard = Guard::kBox;
  c.lo = std::move(lo);
  c.hi = std::move(hi);
  return c;
}

bool Chart::contains(const Eigen::VectorXd& p) const {
  if (p.size() != dim) return false;
  switch (guard) {
    case Guard::kNone:
      return true;
    case Guard::kBall:
      return (p - center).norm() <= radius;
    case Guard::kBox:
      for (Eigen::Index i = 0; i < p.size(); ++i)
        if (p[i] < lo[i] || p[i] > hi[i]) return false;
      return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Transversal

Eigen::VectorXd Transversal::embed(const Eigen::VectorXd& y, const Eigen::VectorXd& x) const {
  if (y.size() != leaf_dim || x.size() != normal_dim())
    throw PreconditionError("transversal embed: component dimension mismatch");
  Eigen::VectorXd v(dim());
  v.head(leaf_dim) = y;
  v.tail(normal_dim()) = x;
  return v;
}

Eigen::VectorXd Transversal::base_part(const Eigen::VectorXd& v) const {
  if (v.size() != dim()) throw PreconditionError("transversal: point dimension mismatch");
  return v.head(leaf_dim);
}

Eigen::VectorXd Transversal::normal_part(const Eigen::VectorXd& v) const {
  if (v.size() != dim()) throw PreconditionError("transversal: point dimension mismatch");
  return v.tail(normal_dim());
}

bool Transversal::on_base(const Eigen::VectorXd& v, double tol) const {
  return normal_part(v).lpNorm<Eigen::Infinity>() <= tol;
}

Eigen::VectorXd Transversal::dilate(double t, const Eigen::VectorXd& v) const {
  Eigen::VectorXd out = v;
  out.tail(normal_dim()) *= t;
  return out;
}

Eigen::MatrixXd Transversal::dilation_matrix(double t) const {
  Eigen::VectorXd d = Eigen::VectorXd::Ones(dim());
  d.tail(normal_dim()).setConstant(t);
  return d.asDiagonal();
}

// ---------------------------------------------------------------------------
// SmoothMap

SmoothMap::SmoothMap(int dim_in, int dim_out, JetFn fn)
    : dim_in_(dim_in), dim_out_(dim_out), fn_(std::move(fn)) {
  if (dim_in_ <= 0 || dim_out_ <= 0) throw PreconditionError("smooth map dimensions must be positive");
}

SmoothMap SmoothMap::from_exprs(std::vector<Expr> comps, int dim_in) {
  const int m = static_cast<int>(comps.size());
  if (m == 0) throw PreconditionError("smooth map needs at least one component");
  auto fn = [comps = std::move(comps), dim_in](const JVecd& in) {
    if (in.size() != dim_in) throw PreconditionError("smooth map: input dimension mismatch");
    JVecd out(static_cast<Eigen::Index>(comps.size()));
    for (std::size_t i = 0; i < comps.size(); ++i)
      out[static_cast<Eigen::Index>(i)] = eval<Jetd>(comps[i], in.data(), dim_in);
    return out;
  };
  return SmoothMap(dim_in, m, std::move(fn));
}

SmoothMap SmoothMap::identity(int dim) {
  return SmoothMap(dim, dim, [](const JVecd& in) { return in; });
}

SmoothMap SmoothMap::affine(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  if (A.rows() != b.size()) throw PreconditionError("affine map: shape mismatch");
  const int n = static_cast<int>(A.cols());
  const int m = static_cast<int>(A.rows());
  auto fn = [A, b, n, m](const JVecd& in) {
    if (in.size() != n) throw PreconditionError("affine map: input dimension mismatch");
    JVecd out(m);
    for (int i = 0; i < m; ++i) {
      Jetd acc(b[i]);
      for (int j = 0; j < n; ++j) acc = acc + A(i, j) * in[j];
      out[i] = acc;
    }
    return out;
  };
  return SmoothMap(n, m, std::move(fn));
}

SmoothMap SmoothMap::linear(const Eigen::MatrixXd& A) {
  return affine(A, Eigen::VectorXd::Zero(A.rows()));
}

JVecd SmoothMap::operator()(const JVecd& in) const {
  if (!fn_) throw PreconditionError("evaluating an empty smooth map");
  if (in.size() != dim_in_) throw PreconditionError("smooth map: input dimension mismatch");
  JVecd out = fn_(in);
  if (out.size() != dim_out_) throw NumericError("smooth map produced wrong output dimension");
  return out;
}

JVecd SmoothMap::jets(const Eigen::VectorXd& p, const std::vector<Eigen::VectorXd>& dirs) const {
  return (*this)(make_jets(p, dirs));
}

Eigen::VectorXd SmoothMap::value(const Eigen::VectorXd& p) const {
  return jet_values(jets(p));
}

Eigen::MatrixXd SmoothMap::jacobian(const Eigen::VectorXd& p) const {
  Eigen::MatrixXd J(dim_out_, dim_in_);
  for (int j0 = 0; j0 < dim_in_; j0 += Jetd::kMaxDirs) {
    const int k = std::min(Jetd::kMaxDirs, dim_in_ - j0);
    std::vector<Eigen::VectorXd> dirs;
    dirs.reserve(k);
    for (int d = 0; d < k; ++d) dirs.push_back(Eigen::VectorXd::Unit(dim_in_, j0 + d));
    const JVecd out = jets(p, dirs);
    J.block(0, j0, dim_out_, k) = jet_firsts(out, k);
  }
  return J;
}

Eigen::VectorXd SmoothMap::hessian_dir(const Eigen::VectorXd& p, const Eigen::VectorXd& u,
                                       const Eigen::VectorXd& v) const {
  const JVecd out = jets(p, {u, v});
  return jet_second(out, 0, 1);
}

SmoothMap SmoothMap::then(const SmoothMap& outer) const {
  if (!valid() || !outer.valid()) throw PreconditionError("composing an empty smooth map");
  if (dim_out_ != outer.dim_in())
    throw PreconditionError("smooth map composition: dimension mismatch");
  SmoothMap inner = *this;
  return SmoothMap(dim_in_, outer.dim_out(),
                   [inner, outer](const JVecd& in) { return outer(inner(in)); });
}

JVecd lie_bracket_jets(const SmoothMap& X, const SmoothMap& Y, const Eigen::VectorXd& p,
                       const std::vector<Eigen::VectorXd>& dirs) {
  const int n = X.dim_in();
  if (X.dim_out() != n || Y.dim_in() != n || Y.dim_out() != n)
    throw PreconditionError("lie_bracket_jets: fields must map a chart to itself");
  if (dirs.size() > 2)
    throw PreconditionError("lie_bracket_jets: at most two derivative directions");
  const int k = static_cast<int>(dirs.size());

  const JVecd Xp = X.jets(p, dirs);
  const JVecd Yp = Y.jets(p, dirs);
  const Eigen::VectorXd Xval = jet_values(Xp);
  const Eigen::VectorXd Yval = jet_values(Yp);

  std::vector<Eigen::VectorXd> xfirst(k), yfirst(k);
  for (int d = 0; d < k; ++d) {
    xfirst[d] = jet_first(Xp, d);
    yfirst[d] = jet_first(Yp, d);
  }

  // seeds: (other field's value, then the requested directions)
  std::vector<Eigen::VectorXd> ys{Xval}, xs{Yval};
  for (const auto& w : dirs) {
    ys.push_back(w);
    xs.push_back(w);
  }
  const JVecd Yx = Y.jets(p, ys);  // g0 = DY X, h(0,1+d) = D2Y[X, w_d]
  const JVecd Xy = X.jets(p, xs);

  JVecd out(n);
  const Eigen::VectorXd val = jet_first(Yx, 0) - jet_first(Xy, 0);
  for (int i = 0; i < n; ++i) out[i] = Jetd(val[i]);

  if (k > 0) {
    // d/dw [DY X - DX Y] = D2Y[X,w] + DY DX w - D2X[Y,w] - DX DY w
    const JVecd Ydx = Y.jets(p, xfirst);
    const JVecd Xdy = X.jets(p, yfirst);
    for (int d = 0; d < k; ++d) {
      const Eigen::VectorXd dd = jet_second(Yx, 0, 1 + d) + jet_first(Ydx, d) -
                                 jet_second(Xy, 0, 1 + d) - jet_first(Xdy, d);
      for (int i = 0; i < n; ++i) out[i].g[d] = dd[i];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// index packing

namespace detail {
int triple_index(int i, int j, int k, int n) {
  // lexicographic rank of (i, j, k) with i < j < k among all such triples
  int idx = 0;
  for (int a = 0; a < i; ++a) idx += (n - 1 - a) * (n - 2 - a) / 2;
  for (int b = i + 1; b < j; ++b) idx += n - 1 - b;
  return idx + (k - j - 1);
}

namespace {
Expr minor_det(const std::vector<Expr>& M, int stride, const std::vector<int>& rows,
               const std::vector<int>& cols) {
  const int k = static_cast<int>(rows.size());
  if (k == 1) return M[static_cast<size_t>(rows[0] * stride + cols[0])];
  const std::vector<int> sub_rows(rows.begin() + 1, rows.end());
  Expr acc;
  for (int c = 0; c < k; ++c) {
    std::vector<int> sub_cols;
    sub_cols.reserve(static_cast<size_t>(k - 1));
    for (int cc = 0; cc < k; ++cc)
      if (cc != c) sub_cols.push_back(cols[cc]);
    Expr term =
        M[static_cast<size_t>(rows[0] * stride + cols[c])] * minor_det(M, stride, sub_rows, sub_cols);
    if (c % 2 == 1) term = -term;
    acc = acc.valid() ? acc + term : term;
  }
  return acc;
}
}  // namespace

Expr expr_det(const std::vector<Expr>& M, int k) {
  std::vector<int> idx(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) idx[static_cast<size_t>(i)] = i;
  return minor_det(M, k, idx, idx);
}

std::vector<Expr> expr_adjugate(const std::vector<Expr>& M, int k) {
  std::vector<Expr> adj(static_cast<size_t>(k * k));
  if (k == 1) {
    adj[0] = Expr::constant(1.0);
    return adj;
  }
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      std::vector<int> rows, cols;
      for (int rr = 0; rr < k; ++rr)
        if (rr != j) rows.push_back(rr);
      for (int cc = 0; cc < k; ++cc)
        if (cc != i) cols.push_back(cc);
      Expr m = minor_det(M, k, rows, cols);
      if ((i + j) % 2 == 1) m = -m;
      adj[static_cast<size_t>(i * k + j)] = m;
    }
  }
  return adj;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// form evaluators

Eigen::MatrixXd TwoFormEval::matrix(const Eigen::VectorXd& p) const {
  if (!val) throw PreconditionError("two-form evaluator has no value level");
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j) {
      const double v = val(p, Eigen::VectorXd::Unit(dim, i), Eigen::VectorXd::Unit(dim, j));
      M(i, j) = v;
      M(j, i) = -v;
    }
  return M;
}

// ---------------------------------------------------------------------------
// expression-backed fields

double ScalarField::value(const Eigen::VectorXd& p) const {
  JVecd jp = make_jets(p);
  return value_jet(jp).v;
}

Jetd ScalarField::value_jet(const JVecd& p) const {
  if (p.size() != chart.dim) throw PreconditionError("scalar field: point dimension mismatch");
  return eval<Jetd>(f, p.data(), chart.dim);
}

Eigen::VectorXd ScalarField::gradient(const Eigen::VectorXd& p) const {
  const int n = chart.dim;
  Eigen::VectorXd g(n);
  for (int j0 = 0; j0 < n; j0 += Jetd::kMaxDirs) {
    const int k = std::min(Jetd::kMaxDirs, n - j0);
    std::vector<Eigen::VectorXd> dirs;
    for (int d = 0; d < k; ++d) dirs.push_back(Eigen::VectorXd::Unit(n, j0 + d));
    const Jetd out = value_jet(make_jets(p, dirs));
    for (int d = 0; d < k; ++d) g[j0 + d] = out.g[d];
  }
  return g;
}

VectorField VectorField::euler(const Chart& chart) {
  VectorField X;
  X.chart = chart;
  X.comps.reserve(chart.dim);
  for (int i = 0; i < chart.dim; ++i) X.comps.push_back(Expr::variable(i));
  return X;
}

Eigen::VectorXd VectorField::value(const Eigen::VectorXd& p) const {
  return jet_values(value_jet(make_jets(p)));
}

JVecd VectorField::value_jet(const JVecd& p) const {
  if (static_cast<int>(comps.size()) != chart.dim)
    throw PreconditionError("vector field: component count mismatch");
  if (p.size() != chart.dim) throw PreconditionError("vector field: point dimension mismatch");
  JVecd out(chart.dim);
  for (int i = 0; i < chart.dim; ++i) out[i] = eval<Jetd>(comps[i], p.data(), chart.dim);
  return out;
}

SmoothMap VectorField::as_map() const {
  return SmoothMap::from_exprs(comps, chart.dim);
}

Eigen::VectorXd OneForm::components(const Eigen::VectorXd& p) const {
  if (static_cast<int>(comps.size()) != chart.dim)
    throw PreconditionError("one-form: component count mismatch");
  Eigen::VectorXd out(chart.dim);
  for (int i = 0; i < chart.dim; ++i) out[i] = eval<double>(comps[i], p.data(), chart.dim);
  return out;
}

Jetd OneForm::apply(const JVecd& p, const JVecd& u) const {
  if (p.size() != chart.dim || u.size() != chart.dim)
    throw PreconditionError("one-form apply: dimension mismatch");
  Jetd acc(0.0);
  for (int i = 0; i < chart.dim; ++i)
    acc = acc + eval<Jetd>(comps[i], p.data(), chart.dim) * u[i];
  return acc;
}

OneFormEval OneForm::evaluator() const {
  OneFormEval ev;
  ev.dim = chart.dim;
  const OneForm self = *this;
  ev.val = [self](const Eigen::VectorXd& p, const Eigen::VectorXd& u) {
    return self.components(p).dot(u);
  };
  ev.d1 = [self](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& w) {
    const Jetd out = self.apply(make_jets(p, {w}), make_jets(u));
    return out.g[0];
  };
  ev.d2 = [self](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& w1,
                 const Eigen::VectorXd& w2) {
    const Jetd out = self.apply(make_jets(p, {w1, w2}), make_jets(u));
    return out.hess(0, 1);
  };
  return ev;
}

TwoForm TwoForm::zero(const Chart& chart) {
  TwoForm w;
  w.chart = chart;
  w.packed.assign(detail::pair_count(chart.dim), Expr::constant(0.0));
  return w;
}

void TwoForm::set(int i, int j, const Expr& e) {
  if (i == j || i < 0 || j < 0 || i >= chart.dim || j >= chart.dim)
    throw PreconditionError("two-form set: bad index pair");
  if (i < j)
    packed[detail::pair_index(i, j, chart.dim)] = e;
  else
    packed[detail::pair_index(j, i, chart.dim)] = -e;
}

Expr TwoForm::entry(int i, int j) const {
  if (i < 0 || j < 0 || i >= chart.dim || j >= chart.dim)
    throw PreconditionError("two-form entry: bad index pair");
  if (i == j) return Expr::constant(0.0);
  if (i < j) return packed[detail::pair_index(i, j, chart.dim)];
  return -packed[detail::pair_index(j, i, chart.dim)];
}

Eigen::MatrixXd TwoForm::matrix(const Eigen::VectorXd& p) const {
  const int n = chart.dim;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = eval<double>(packed[detail::pair_index(i, j, n)], p.data(), n);
      M(i, j) = v;
      M(j, i) = -v;
    }
  return M;
}

Jetd TwoForm::apply(const JVecd& p, const JVecd& u, const JVecd& v) const {
  const int n = chart.dim;
  if (p.size() != n || u.size() != n || v.size() != n)
    throw PreconditionError("two-form apply: dimension mismatch");
  Jetd acc(0.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const Jetd c = eval<Jetd>(packed[detail::pair_index(i, j, n)], p.data(), n);
      acc = acc + c * (u[i] * v[j] - u[j] * v[i]);
    }
  return acc;
}

TwoFormEval TwoForm::evaluator() const {
  TwoFormEval ev;
  ev.dim = chart.dim;
  const TwoForm self = *this;
  ev.val = [self](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    return u.dot(self.matrix(p) * v);
  };
  ev.d1 = [self](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                 const Eigen::VectorXd& w) {
    const Jetd out = self.apply(make_jets(p, {w}), make_jets(u), make_jets(v));
    return out.g[0];
  };
  ev.d2 = [self](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                 const Eigen::VectorXd& w1, const Eigen::VectorXd& w2) {
    const Jetd out = self.apply(make_jets(p, {w1, w2}), make_jets(u), make_jets(v));
    return out.hess(0, 1);
  };
  return ev;
}

ThreeForm ThreeForm::zero(const Chart& chart) {
  ThreeForm h;
  h.chart = chart;
  h.packed.assign(detail::triple_count(chart.dim), Expr::constant(0.0));
  return h;
}

namespace {
// sign of the permutation sorting three distinct indices
int sort3(int& i, int& j, int& k) {
  int sign = 1;
  if (i > j) { std::swap(i, j); sign = -sign; }
  if (j > k) { std::swap(j, k); sign = -sign; }
  if (i > j) { std::swap(i, j); sign = -sign; }
  return sign;
}
}  // namespace

void ThreeForm::set(int i, int j, int k, const Expr& e) {
  if (i == j || j == k || i == k || i < 0 || j < 0 || k < 0 || i >= chart.dim ||
      j >= chart.dim || k >= chart.dim)
    throw PreconditionError("three-form set: bad index triple");
  int a = i, b = j, c = k;
  const int sign = sort3(a, b, c);
  packed[detail::triple_index(a, b, c, chart.dim)] = sign > 0 ? e : -e;
}

Expr ThreeForm::entry(int i, int j, int k) const {
  if (i < 0 || j < 0 || k < 0 || i >= chart.dim || j >= chart.dim || k >= chart.dim)
    throw PreconditionError("three-form entry: bad index triple");
  if (i == j || j == k || i == k) return Expr::constant(0.0);
  int a = i, b = j, c = k;
  const int sign = sort3(a, b, c);
  const Expr& e = packed[detail::triple_index(a, b, c, chart.dim)];
  return sign > 0 ? e : -e;
}

Jetd ThreeForm::apply(const JVecd& p, const JVecd& u, const JVecd& v, const JVecd& w) const {
  const int n = chart.dim;
  if (p.size() != n || u.size() != n || v.size() != n || w.size() != n)
    throw PreconditionError("three-form apply: dimension mismatch");
  Jetd acc(0.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = j + 1; k < n; ++k) {
        const Jetd c = eval<Jetd>(packed[detail::triple_index(i, j, k, n)], p.data(), n);
        const Jetd det = u[i] * (v[j] * w[k] - v[k] * w[j]) -
                         u[j] * (v[i] * w[k] - v[k] * w[i]) +
                         u[k] * (v[i] * w[j] - v[j] * w[i]);
        acc = acc + c * det;
      }
  return acc;
}

ThreeFormEval ThreeForm::evaluator() const {
  ThreeFormEval ev;
  ev.dim = chart.dim;
  const ThreeForm self = *this;
  ev.val = [self](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                  const Eigen::VectorXd& w) {
    return self.apply(make_jets(p), make_jets(u), make_jets(v), make_jets(w)).v;
  };
  ev.d1 = [self](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                 const Eigen::VectorXd& w, const Eigen::VectorXd& z) {
    return self.apply(make_jets(p, {z}), make_jets(u), make_jets(v), make_jets(w)).g[0];
  };
  return ev;
}

Bivector Bivector::zero(const Chart& chart) {
  Bivector pi;
  pi.chart = chart;
  pi.packed.assign(detail::pair_count(chart.dim), Expr::constant(0.0));
  return pi;
}

void Bivector::set(int i, int j, const Expr& e) {
  if (i == j || i < 0 || j < 0 || i >= chart.dim || j >= chart.dim)
    throw PreconditionError("bivector set: bad index pair");
  if (i < j)
    packed[detail::pair_index(i, j, chart.dim)] = e;
  else
    packed[detail::pair_index(j, i, chart.dim)] = -e;
}

Expr Bivector::entry(int i, int j) const {
  if (i < 0 || j < 0 || i >= chart.dim || j >= chart.dim)
    throw PreconditionError("bivector entry: bad index pair");
  if (i == j) return Expr::constant(0.0);
  if (i < j) return packed[detail::pair_index(i, j, chart.dim)];
  return -packed[detail::pair_index(j, i, chart.dim)];
}

Eigen::MatrixXd Bivector::matrix(const Eigen::VectorXd& p) const {
  const int n = chart.dim;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = eval<double>(packed[detail::pair_index(i, j, n)], p.data(), n);
      M(i, j) = v;
      M(j, i) = -v;
    }
  return M;
}

JMatd Bivector::matrix_jet(const JVecd& p) const {
  const int n = chart.dim;
  if (p.size() != n) throw PreconditionError("bivector: point dimension mismatch");
  JMatd M(n, n);
  for (int i = 0; i < n; ++i) M(i, i) = Jetd(0.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const Jetd v = eval<Jetd>(packed[detail::pair_index(i, j, n)], p.data(), n);
      M(i, j) = v;
      M(j, i) = -v;
    }
  return M;
}

Eigen::VectorXd Bivector::sharp(const Eigen::VectorXd& p, const Eigen::VectorXd& mu) const {
  if (mu.size() != chart.dim) throw PreconditionError("bivector sharp: covector dimension mismatch");
  return matrix(p).transpose() * mu;
}

JVecd Bivector::sharp_jet(const JVecd& p, const JVecd& mu) const {
  if (mu.size() != chart.dim) throw PreconditionError("bivector sharp: covector dimension mismatch");
  return matrix_jet(p).transpose() * mu;
}

Expr Trivector::entry(int i, int j, int k) const {
  if (i == j || j == k || i == k) return Expr::constant(0.0);
  int a = i, b = j, c = k;
  const int sign = sort3(a, b, c);
  const Expr& e = packed[detail::triple_index(a, b, c, chart.dim)];
  return sign > 0 ? e : -e;
}

double Trivector::component(const Eigen::VectorXd& p, int i, int j, int k) const {
  return eval<double>(entry(i, j, k), p.data(), chart.dim);
}

double Trivector::max_abs(const Eigen::VectorXd& p) const {
  double m = 0.0;
  const int n = chart.dim;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = j + 1; k < n; ++k)
        m = std::max(m, std::abs(eval<double>(packed[detail::triple_index(i, j, k, n)],
                                              p.data(), n)));
  return m;
}

// ---------------------------------------------------------------------------
// symbolic operations

TwoForm exterior_derivative(const OneForm& a) {
  TwoForm w = TwoForm::zero(a.chart);
  for (int i = 0; i < a.chart.dim; ++i)
    for (int j = i + 1; j < a.chart.dim; ++j)
      w.set(i, j, derivative(a.comps[j], i) - derivative(a.comps[i], j));
  return w;
}

ThreeForm exterior_derivative(const TwoForm& w) {
  ThreeForm h = ThreeForm::zero(w.chart);
  for (int i = 0; i < w.chart.dim; ++i)
    for (int j = i + 1; j < w.chart.dim; ++j)
      for (int k = j + 1; k < w.chart.dim; ++k)
        h.set(i, j, k, derivative(w.entry(j, k), i) - derivative(w.entry(i, k), j) +
                           derivative(w.entry(i, j), k));
  return h;
}

OneForm interior_product(const VectorField& X, const TwoForm& w) {
  if (X.chart.dim != w.chart.dim) throw PreconditionError("interior product: chart mismatch");
  OneForm a;
  a.chart = w.chart;
  a.comps.reserve(w.chart.dim);
  for (int j = 0; j < w.chart.dim; ++j) {
    Expr acc = Expr::constant(0.0);
    for (int i = 0; i < w.chart.dim; ++i) acc = acc + X.comps[i] * w.entry(i, j);
    a.comps.push_back(acc);
  }
  return a;
}

TwoForm interior_product(const VectorField& X, const ThreeForm& h) {
  if (X.chart.dim != h.chart.dim) throw PreconditionError("interior product: chart mismatch");
  TwoForm w = TwoForm::zero(h.chart);
  for (int j = 0; j < h.chart.dim; ++j)
    for (int k = j + 1; k < h.chart.dim; ++k) {
      Expr acc = Expr::constant(0.0);
      for (int i = 0; i < h.chart.dim; ++i) acc = acc + X.comps[i] * h.entry(i, j, k);
      w.set(j, k, acc);
    }
  return w;
}

VectorField lie_bracket(const VectorField& X, const VectorField& Y) {
  if (X.chart.dim != Y.chart.dim) throw PreconditionError("lie bracket: chart mismatch");
  VectorField Z;
  Z.chart = X.chart;
  Z.comps.reserve(X.chart.dim);
  for (int i = 0; i < X.chart.dim; ++i) {
    Expr acc = Expr::constant(0.0);
    for (int j = 0; j < X.chart.dim; ++j)
      acc = acc + X.comps[j] * derivative(Y.comps[i], j) -
            Y.comps[j] * derivative(X.comps[i], j);
    Z.comps.push_back(acc);
  }
  return Z;
}

TwoForm add(const TwoForm& a, const TwoForm& b) {
  if (a.chart.dim != b.chart.dim) throw PreconditionError("two-form add: chart mismatch");
  TwoForm out = TwoForm::zero(a.chart);
  for (size_t q = 0; q < out.packed.size(); ++q) out.packed[q] = a.packed[q] + b.packed[q];
  return out;
}

ThreeForm add(const ThreeForm& a, const ThreeForm& b) {
  if (a.chart.dim != b.chart.dim) throw PreconditionError("three-form add: chart mismatch");
  ThreeForm out = ThreeForm::zero(a.chart);
  for (size_t q = 0; q < out.packed.size(); ++q) out.packed[q] = a.packed[q] + b.packed[q];
  return out;
}

Trivector jacobiator(const Bivector& pi) {
  const int n = pi.chart.dim;
  Trivector J;
  J.chart = pi.chart;
  J.packed.assign(detail::triple_count(n), Expr::constant(0.0));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = j + 1; k < n; ++k) {
        Expr acc = Expr::constant(0.0);
        for (int l = 0; l < n; ++l)
          acc = acc + pi.entry(l, i) * derivative(pi.entry(j, k), l) +
                pi.entry(l, j) * derivative(pi.entry(k, i), l) +
                pi.entry(l, k) * derivative(pi.entry(i, j), l);
        J.packed[detail::triple_index(i, j, k, n)] = acc;
      }
  return J;
}

// ---------------------------------------------------------------------------
// symbolic pullbacks

namespace {
std::vector<std::vector<Expr>> jacobian_exprs(const std::vector<Expr>& map, int dim_in) {
  std::vector<std::vector<Expr>> J(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    J[i].reserve(dim_in);
    for (int b = 0; b < dim_in; ++b) J[i].push_back(derivative(map[i], b));
  }
  return J;
}
}  // namespace

ScalarField pullback_expr(const std::vector<Expr>& map, const Chart& domain, const ScalarField& f) {
  if (static_cast<int>(map.size()) != f.chart.dim)
    throw PreconditionError("pullback: map target dimension mismatch");
  return ScalarField{domain, substitute(f.f, map)};
}

OneForm pullback_expr(const std::vector<Expr>& map, const Chart& domain, const OneForm& a) {
  if (static_cast<int>(map.size()) != a.chart.dim)
    throw PreconditionError("pullback: map target dimension mismatch");
  const auto J = jacobian_exprs(map, domain.dim);
  OneForm out;
  out.chart = domain;
  out.comps.reserve(domain.dim);
  for (int b = 0; b < domain.dim; ++b) {
    Expr acc = Expr::constant(0.0);
    for (std::size_t i = 0; i < map.size(); ++i)
      acc = acc + substitute(a.comps[i], map) * J[i][b];
    out.comps.push_back(acc);
  }
  return out;
}

TwoForm pullback_expr(const std::vector<Expr>& map, const Chart& domain, const TwoForm& w) {
  if (static_cast<int>(map.size()) != w.chart.dim)
    throw PreconditionError("pullback: map target dimension mismatch");
  const auto J = jacobian_exprs(map, domain.dim);
  const int m = w.chart.dim;
  TwoForm out = TwoForm::zero(domain);
  for (int a = 0; a < domain.dim; ++a)
    for (int b = a + 1; b < domain.dim; ++b) {
      Expr acc = Expr::constant(0.0);
      for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
          acc = acc + substitute(w.entry(i, j), map) * (J[i][a] * J[j][b] - J[i][b] * J[j][a]);
      out.set(a, b, acc);
    }
  return out;
}

ThreeForm pullback_expr(const std::vector<Expr>& map, const Chart& domain, const ThreeForm& h) {
  if (static_cast<int>(map.size()) != h.chart.dim)
    throw PreconditionError("pullback: map target dimension mismatch");
  const auto J = jacobian_exprs(map, domain.dim);
  const int m = h.chart.dim;
  ThreeForm out = ThreeForm::zero(domain);
  for (int a = 0; a < domain.dim; ++a)
    for (int b = a + 1; b < domain.dim; ++b)
      for (int c = b + 1; c < domain.dim; ++c) {
        Expr acc = Expr::constant(0.0);
        for (int i = 0; i < m; ++i)
          for (int j = i + 1; j < m; ++j)
            for (int k = j + 1; k < m; ++k) {
              const Expr det = J[i][a] * (J[j][b] * J[k][c] - J[j][c] * J[k][b]) -
                               J[i][b] * (J[j][a] * J[k][c] - J[j][c] * J[k][a]) +
                               J[i][c] * (J[j][a] * J[k][b] - J[j][b] * J[k][a]);
              acc = acc + substitute(h.entry(i, j, k), map) * det;
            }
        out.set(a, b, c, acc);
      }
  return out;
}

// ---------------------------------------------------------------------------
// affine coordinate changes

std::vector<Expr> AffineChange::forward_exprs() const {
  const int n = static_cast<int>(A.cols());
  const int m = static_cast<int>(A.rows());
  std::vector<Expr> out;
  out.reserve(m);
  for (int i = 0; i < m; ++i) {
    Expr acc = Expr::constant(b.size() ? b[i] : 0.0);
    for (int j = 0; j < n; ++j)
      if (A(i, j) != 0.0) acc = acc + Expr::constant(A(i, j)) * Expr::variable(j);
    out.push_back(acc);
  }
  return out;
}

namespace {
Eigen::MatrixXd checked_inverse(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols()) throw PreconditionError("coordinate change: matrix must be square");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible()) throw PreconditionError("coordinate change: matrix is singular");
  return lu.inverse();
}
}  // namespace

ScalarField change_coordinates(const AffineChange& c, const Chart& new_chart, const ScalarField& f) {
  return pullback_expr(c.forward_exprs(), new_chart, f);
}

VectorField change_coordinates(const AffineChange& c, const Chart& new_chart, const VectorField& X) {
  const Eigen::MatrixXd Ainv = checked_inverse(c.A);
  const auto map = c.forward_exprs();
  VectorField out;
  out.chart = new_chart;
  out.comps.reserve(new_chart.dim);
  for (int a = 0; a < new_chart.dim; ++a) {
    Expr acc = Expr::constant(0.0);
    for (int i = 0; i < new_chart.dim; ++i)
      if (Ainv(a, i) != 0.0)
        acc = acc + Expr::constant(Ainv(a, i)) * substitute(X.comps[i], map);
    out.comps.push_back(acc);
  }
  return out;
}

OneForm change_coordinates(const AffineChange& c, const Chart& new_chart, const OneForm& a) {
  return pullback_expr(c.forward_exprs(), new_chart, a);
}

TwoForm change_coordinates(const AffineChange& c, const Chart& new_chart, const TwoForm& w) {
  return pullback_expr(c.forward_exprs(), new_chart, w);
}

ThreeForm change_coordinates(const AffineChange& c, const Chart& new_chart, const ThreeForm& h) {
  return pullback_expr(c.forward_exprs(), new_chart, h);
}

Bivector change_coordinates(const AffineChange& c, const Chart& new_chart, const Bivector& pi) {
  const Eigen::MatrixXd Ainv = checked_inverse(c.A);
  const auto map = c.forward_exprs();
  const int n = new_chart.dim;
  Bivector out = Bivector::zero(new_chart);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      Expr acc = Expr::constant(0.0);
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
          const double coef = Ainv(a, i) * Ainv(b, j) - Ainv(b, i) * Ainv(a, j);
          if (coef != 0.0) acc = acc + Expr::constant(coef) * substitute(pi.entry(i, j), map);
        }
      out.set(a, b, acc);
    }
  return out;
}

// ---------------------------------------------------------------------------
// evaluator-level operations

TwoFormEval exterior_derivative(const OneFormEval& a) {
  if (!a.d1) throw PreconditionError("exterior derivative needs first derivatives of the form");
  TwoFormEval w;
  w.dim = a.dim;
  w.val = [a](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    return a.d1(p, v, u) - a.d1(p, u, v);
  };
  if (a.d2) {
    w.d1 = [a](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
               const Eigen::VectorXd& z) {
      return a.d2(p, v, u, z) - a.d2(p, u, v, z);
    };
  }
  return w;
}

ThreeFormEval exterior_derivative(const TwoFormEval& w) {
  if (!w.d1) throw PreconditionError("exterior derivative needs first derivatives of the form");
  ThreeFormEval h;
  h.dim = w.dim;
  h.val = [w](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
              const Eigen::VectorXd& z) {
    return w.d1(p, v, z, u) - w.d1(p, u, z, v) + w.d1(p, u, v, z);
  };
  if (w.d2) {
    h.d1 = [w](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
               const Eigen::VectorXd& z, const Eigen::VectorXd& y) {
      return w.d2(p, v, z, u, y) - w.d2(p, u, z, v, y) + w.d2(p, u, v, z, y);
    };
  }
  return h;
}

OneFormEval interior_product(const SmoothMap& X, const TwoFormEval& w) {
  if (!w.val) throw PreconditionError("interior product: form has no value level");
  if (X.dim_in() != w.dim || X.dim_out() != w.dim)
    throw PreconditionError("interior product: dimension mismatch");
  OneFormEval a;
  a.dim = w.dim;
  a.val = [X, w](const Eigen::VectorXd& p, const Eigen::VectorXd& u) {
    return w.val(p, X.value(p), u);
  };
  if (w.d1) {
    a.d1 = [X, w](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& z) {
      const JVecd Xj = X.jets(p, {z});
      return w.d1(p, jet_values(Xj), u, z) + w.val(p, jet_first(Xj, 0), u);
    };
  }
  if (w.d1 && w.d2) {
    a.d2 = [X, w](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& z1,
                  const Eigen::VectorXd& z2) {
      const JVecd Xj = X.jets(p, {z1, z2});
      const Eigen::VectorXd Xv = jet_values(Xj);
      return w.d2(p, Xv, u, z1, z2) + w.d1(p, jet_first(Xj, 0), u, z2) +
             w.d1(p, jet_first(Xj, 1), u, z1) + w.val(p, jet_second(Xj, 0, 1), u);
    };
  }
  return a;
}

TwoFormEval interior_product(const SmoothMap& X, const ThreeFormEval& h) {
  if (!h.val) throw PreconditionError("interior product: form has no value level");
  if (X.dim_in() != h.dim || X.dim_out() != h.dim)
    throw PreconditionError("interior product: dimension mismatch");
  TwoFormEval w;
  w.dim = h.dim;
  w.val = [X, h](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    return h.val(p, X.value(p), u, v);
  };
  if (h.d1) {
    w.d1 = [X, h](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                  const Eigen::VectorXd& z) {
      const JVecd Xj = X.jets(p, {z});
      return h.d1(p, jet_values(Xj), u, v, z) + h.val(p, jet_first(Xj, 0), u, v);
    };
  }
  return w;
}

OneFormEval pullback(const SmoothMap& phi, const OneFormEval& a) {
  if (!a.val) throw PreconditionError("pullback: form has no value level");
  if (phi.dim_out() != a.dim) throw PreconditionError("pullback: dimension mismatch");
  OneFormEval out;
  out.dim = phi.dim_in();
  out.val = [phi, a](const Eigen::VectorXd& p, const Eigen::VectorXd& u) {
    const JVecd J = phi.jets(p, {u});
    return a.val(jet_values(J), jet_first(J, 0));
  };
  if (a.d1) {
    out.d1 = [phi, a](const Eigen::VectorXd& p, const Eigen::VectorXd& u,
                      const Eigen::VectorXd& z) {
      const JVecd J = phi.jets(p, {u, z});
      const Eigen::VectorXd q = jet_values(J);
      return a.d1(q, jet_first(J, 0), jet_first(J, 1)) + a.val(q, jet_second(J, 0, 1));
    };
  }
  return out;
}

TwoFormEval pullback(const SmoothMap& phi, const TwoFormEval& w) {
  if (!w.val) throw PreconditionError("pullback: form has no value level");
  if (phi.dim_out() != w.dim) throw PreconditionError("pullback: dimension mismatch");
  TwoFormEval out;
  out.dim = phi.dim_in();
  out.val = [phi, w](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    const JVecd J = phi.jets(p, {u, v});
    return w.val(jet_values(J), jet_first(J, 0), jet_first(J, 1));
  };
  if (w.d1) {
    out.d1 = [phi, w](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                      const Eigen::VectorXd& z) {
      const JVecd J = phi.jets(p, {u, v, z});
      const Eigen::VectorXd q = jet_values(J);
      const Eigen::VectorXd A = jet_first(J, 0), B = jet_first(J, 1), C = jet_first(J, 2);
      return w.d1(q, A, B, C) + w.val(q, jet_second(J, 0, 2), B) + w.val(q, A, jet_second(J, 1, 2));
    };
  }
  return out;
}

ThreeFormEval pullback(const SmoothMap& phi, const ThreeFormEval& h) {
  if (!h.val) throw PreconditionError("pullback: form has no value level");
  if (phi.dim_out() != h.dim) throw PreconditionError("pullback: dimension mismatch");
  ThreeFormEval out;
  out.dim = phi.dim_in();
  out.val = [phi, h](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                     const Eigen::VectorXd& z) {
    const JVecd J = phi.jets(p, {u, v, z});
    return h.val(jet_values(J), jet_first(J, 0), jet_first(J, 1), jet_first(J, 2));
  };
  if (h.d1) {
    out.d1 = [phi, h](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                      const Eigen::VectorXd& z, const Eigen::VectorXd& y) {
      const JVecd J1 = phi.jets(p, {u, v, y});
      const JVecd J2 = phi.jets(p, {z, y});
      const Eigen::VectorXd q = jet_values(J1);
      const Eigen::VectorXd A = jet_first(J1, 0), B = jet_first(J1, 1), Y = jet_first(J1, 2);
      const Eigen::VectorXd C = jet_first(J2, 0);
      return h.d1(q, A, B, C, Y) + h.val(q, jet_second(J1, 0, 2), B, C) +
             h.val(q, A, jet_second(J1, 1, 2), C) + h.val(q, A, B, jet_second(J2, 0, 1));
    };
  }
  return out;
}

TwoFormEval add(const TwoFormEval& a, const TwoFormEval& b) {
  if (a.dim != b.dim) throw PreconditionError("adding two-forms of different dimension");
  TwoFormEval out;
  out.dim = a.dim;
  if (a.val && b.val)
    out.val = [a, b](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
      return a.val(p, u, v) + b.val(p, u, v);
    };
  if (a.d1 && b.d1)
    out.d1 = [a, b](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                    const Eigen::VectorXd& z) { return a.d1(p, u, v, z) + b.d1(p, u, v, z); };
  if (a.d2 && b.d2)
    out.d2 = [a, b](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                    const Eigen::VectorXd& z1, const Eigen::VectorXd& z2) {
      return a.d2(p, u, v, z1, z2) + b.d2(p, u, v, z1, z2);
    };
  return out;
}

TwoFormEval scale(double c, const TwoFormEval& a) {
  TwoFormEval out;
  out.dim = a.dim;
  if (a.val)
    out.val = [c, a](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
      return c * a.val(p, u, v);
    };
  if (a.d1)
    out.d1 = [c, a](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                    const Eigen::VectorXd& z) { return c * a.d1(p, u, v, z); };
  if (a.d2)
    out.d2 = [c, a](const Eigen::VectorXd& p, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                    const Eigen::VectorXd& z1, const Eigen::VectorXd& z2) {
      return c * a.d2(p, u, v, z1, z2);
    };
  return out;
}

}  // namespace splitform
