#include "splitform/euler.hpp"

#include <algorithm>
#include <limits>
#include <cmath>

namespace splitform {

SmoothMap fiber_euler(const Transversal& nu) {
  const int n = nu.dim();
  std::vector<Expr> comps;
  comps.reserve(n);
  for (int i = 0; i < nu.leaf_dim; ++i) comps.push_back(Expr::constant(0.0));
  for (int i = nu.leaf_dim; i < n; ++i) comps.push_back(Expr::variable(i));
  return SmoothMap::from_exprs(comps, n);
}

Eigen::MatrixXd normal_derivative(const SmoothMap& X, const Transversal& nu,
                                  const Eigen::VectorXd& y) {
  const int n = nu.dim();
  const int p = nu.leaf_dim;
  const int k = nu.normal_dim();
  if (X.dim_in() != n || X.dim_out() != n)
    throw PreconditionError("normal_derivative: field dimension mismatch");
  const Eigen::VectorXd base = nu.embed(y, Eigen::VectorXd::Zero(k));
  Eigen::MatrixXd M(k, k);
  for (int b0 = 0; b0 < k; b0 += Jetd::kMaxDirs) {
    const int nb = std::min(Jetd::kMaxDirs, k - b0);
    std::vector<Eigen::VectorXd> dirs;
    for (int d = 0; d < nb; ++d) dirs.push_back(Eigen::VectorXd::Unit(n, p + b0 + d));
    const JVecd out = X.jets(base, dirs);
    for (int d = 0; d < nb; ++d)
      for (int a = 0; a < k; ++a) M(a, b0 + d) = out[p + a].g[d];
  }
  return M;
}

EulerLikeReport is_euler_like(const SmoothMap& X, const Transversal& nu,
                              const std::vector<Eigen::VectorXd>& base_points, double tol) {
  EulerLikeReport rep;
  const int k = nu.normal_dim();
  for (const auto& y : base_points) {
    const Eigen::VectorXd base = nu.embed(y, Eigen::VectorXd::Zero(k));
    rep.max_value_residual =
        std::max(rep.max_value_residual, X.value(base).lpNorm<Eigen::Infinity>());
    const Eigen::MatrixXd M = normal_derivative(X, nu, y);
    rep.max_normal_residual = std::max(
        rep.max_normal_residual,
        (M - Eigen::MatrixXd::Identity(k, k)).lpNorm<Eigen::Infinity>());
  }
  rep.pass = rep.max_value_residual <= tol && rep.max_normal_residual <= tol;
  return rep;
}

JVecd evaluate_Zt(const SmoothMap& X, const Transversal& nu, double t, const JVecd& v,
                  double t_min) {
  const int n = nu.dim();
  const int p = nu.leaf_dim;
  if (v.size() != n) throw PreconditionError("evaluate_Zt: state dimension mismatch");
  const double te = std::max(t, t_min);

  JVecd scaled = v;
  for (int i = p; i < n; ++i) scaled[i] = te * v[i];
  const JVecd Xv = X(scaled);

  JVecd out(n);
  for (int i = 0; i < p; ++i) out[i] = Xv[i] / te;
  for (int i = p; i < n; ++i) out[i] = (Xv[i] - scaled[i]) / (te * te);
  return out;
}

TubularEmbedding::TubularEmbedding(SmoothMap X, Transversal nu, LinearizeConfig cfg)
    : X_(std::move(X)), nu_(std::move(nu)), cfg_(std::move(cfg)) {}

SmoothMap TubularEmbedding::psi() const {
  const SmoothMap X = X_;
  const Transversal nu = nu_;
  const LinearizeConfig cfg = cfg_;
  const int n = nu_.dim();
  return SmoothMap(n, n, [X, nu, cfg](const JVecd& v) {
    auto rhs = [&X, &nu, &cfg](double t, const JVecd& u) {
      return evaluate_Zt(X, nu, t, u, cfg.t_min);
    };
    return integrate_ode(rhs, 0.0, 1.0, v, cfg.flow).state;
  });
}

SmoothMap TubularEmbedding::psi_inverse() const {
  const SmoothMap forward = psi();
  const TubularEmbedding self = *this;
  const LinearizeConfig cfg = cfg_;
  const int n = nu_.dim();
  return SmoothMap(n, n, [forward, self, cfg, n](const JVecd& w) {
    const Eigen::VectorXd target = jet_values(w);

    // residual evaluation; escapes and blow-ups count as infinitely bad
    auto residual = [&](const Eigen::VectorXd& u, Eigen::VectorXd& r) {
      try {
        r = forward.value(u) - target;
        return r.norm();
      } catch (const NumericError&) {
        return std::numeric_limits<double>::infinity();
      }
    };

    // damped Newton; identity guess first, dilation-orbit guess as fallback
    Eigen::VectorXd u = target;
    Eigen::VectorXd r(n);
    if (!std::isfinite(residual(u, r))) u = self.psi_inverse_via_dilation(target, 0.25, 4);

    int it = 0;
    for (; it < cfg.newton_max_iter; ++it) {
      const double rnorm = residual(u, r);
      if (!std::isfinite(rnorm))
        throw NumericError("psi_inverse: iterate left the domain of the forward map");
      if (rnorm <= cfg.newton_tol) break;
      const Eigen::VectorXd du = forward.jacobian(u).partialPivLu().solve(-r);
      double alpha = 1.0;
      Eigen::VectorXd rt(n);
      while (alpha > 1.0 / 64) {
        if (residual(u + alpha * du, rt) <= (1.0 - 0.25 * alpha) * rnorm) break;
        alpha *= 0.5;
      }
      u += alpha * du;
    }
    if (it == cfg.newton_max_iter)
      throw NumericError("psi_inverse: Newton iteration did not converge");

    bool seeded = false;
    for (Eigen::Index i = 0; i < w.size() && !seeded; ++i)
      seeded = w[i].g.squaredNorm() != 0.0 || w[i].h.squaredNorm() != 0.0;
    if (!seeded) {
      JVecd out(n);
      for (int i = 0; i < n; ++i) out[i] = Jetd(u[i]);
      return out;
    }

    const Eigen::MatrixXd J = forward.jacobian(u);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);

    // first order: dv = J^{-1} dw
    Eigen::MatrixXd vdirs(n, Jetd::kMaxDirs);
    for (int d = 0; d < Jetd::kMaxDirs; ++d) {
      Eigen::VectorXd wd(n);
      for (int i = 0; i < n; ++i) wd[i] = w[i].g[d];
      vdirs.col(d) = lu.solve(wd);
    }

    // second order through one seeded forward transport:
    // v_ab = J^{-1} (w_ab - D2psi[v_a, v_b])
    std::vector<Eigen::VectorXd> dirs;
    for (int d = 0; d < Jetd::kMaxDirs; ++d) dirs.push_back(vdirs.col(d));
    const JVecd transported = forward.jets(u, dirs);

    JVecd out(n);
    for (int i = 0; i < n; ++i) out[i] = Jetd(u[i]);
    for (int d = 0; d < Jetd::kMaxDirs; ++d)
      for (int i = 0; i < n; ++i) out[i].g[d] = vdirs(i, d);
    for (int b = 0; b < Jetd::kMaxDirs; ++b)
      for (int a = 0; a <= b; ++a) {
        Eigen::VectorXd rhs(n);
        for (int i = 0; i < n; ++i) rhs[i] = w[i].hess(a, b) - transported[i].hess(a, b);
        const Eigen::VectorXd vab = lu.solve(rhs);
        for (int i = 0; i < n; ++i) out[i].h[Jetd::idx(a, b)] = vab[i];
      }
    return out;
  });
}

SmoothMap TubularEmbedding::dilation(double t) const {
  if (!(t > 0.0)) throw PreconditionError("dilation: t must be positive");
  return flow_map(X_, std::log(t), cfg_.flow);
}

namespace {
Eigen::VectorXd richardson_limit(std::vector<Eigen::VectorXd> seq) {
  // first-order sequence v_k = v + c q^k with q = 1/2: eliminate level by level
  for (std::size_t level = 1; level < seq.size(); ++level)
    for (std::size_t i = 0; i + level < seq.size(); ++i)
      seq[i] = 2.0 * seq[i + 1] - seq[i];
  return seq.empty() ? Eigen::VectorXd() : seq[0];
}
}  // namespace

Eigen::VectorXd TubularEmbedding::psi_via_scaling_flow(const Eigen::VectorXd& v, double t0,
                                                       int levels) const {
  std::vector<Eigen::VectorXd> seq;
  double t = t0;
  for (int k = 0; k < levels; ++k, t *= 0.5) {
    const Eigen::VectorXd shrunk = nu_.dilate(t, v);
    seq.push_back(flow_point(X_, -std::log(t), shrunk, cfg_.flow));
  }
  return richardson_limit(std::move(seq));
}

Eigen::VectorXd TubularEmbedding::psi_inverse_via_dilation(const Eigen::VectorXd& m, double t0,
                                                           int levels) const {
  std::vector<Eigen::VectorXd> seq;
  double t = t0;
  for (int k = 0; k < levels; ++k, t *= 0.5) {
    const Eigen::VectorXd moved = flow_point(X_, std::log(t), m, cfg_.flow);
    Eigen::VectorXd v(nu_.dim());
    v.head(nu_.leaf_dim) = nu_.base_part(moved);
    v.tail(nu_.normal_dim()) = nu_.normal_part(moved) / t;
    seq.push_back(v);
  }
  return richardson_limit(std::move(seq));
}

double TubularEmbedding::pushforward_residual(const std::vector<Eigen::VectorXd>& pts) const {
  const SmoothMap map = psi();
  const SmoothMap E = fiber_euler(nu_);
  double worst = 0.0;
  for (const auto& v : pts) {
    const JVecd out = map.jets(v, {E.value(v)});
    const Eigen::VectorXd lhs = jet_first(out, 0);
    const Eigen::VectorXd rhs = X_.value(jet_values(out));
    worst = std::max(worst, (lhs - rhs).lpNorm<Eigen::Infinity>());
  }
  return worst;
}

double TubularEmbedding::intertwine_residual(const std::vector<Eigen::VectorXd>& pts,
                                             const std::vector<double>& ts) const {
  const SmoothMap map = psi();
  double worst = 0.0;
  for (const auto& v : pts) {
    const Eigen::VectorXd pv = map.value(v);
    for (double t : ts) {
      const Eigen::VectorXd lhs = map.value(nu_.dilate(t, v));
      const Eigen::VectorXd rhs = flow_point(X_, std::log(t), pv, cfg_.flow);
      worst = std::max(worst, (lhs - rhs).lpNorm<Eigen::Infinity>());
    }
  }
  return worst;
}

TubularEmbedding linearize(const SmoothMap& X, const Transversal& nu,
                           const LinearizeConfig& cfg) {
  if (X.dim_in() != nu.dim() || X.dim_out() != nu.dim())
    throw PreconditionError("linearize: field dimension mismatch");

  std::vector<Eigen::VectorXd> pts = cfg.check_points;
  if (pts.empty()) {
    const int p = nu.leaf_dim;
    pts.push_back(Eigen::VectorXd::Zero(p));
    for (int j = 0; j < p; ++j) {
      pts.push_back(0.15 * Eigen::VectorXd::Unit(p, j));
      pts.push_back(-0.15 * Eigen::VectorXd::Unit(p, j));
    }
  }
  const EulerLikeReport rep = is_euler_like(X, nu, pts, cfg.euler_tol);
  if (!rep.pass)
    throw PreconditionError(
        "linearize: field is not admissible (value residual " +
        std::to_string(rep.max_value_residual) + ", normal derivative residual " +
        std::to_string(rep.max_normal_residual) + ")");
  return TubularEmbedding(X, nu, cfg);
}

}  // namespace splitform
