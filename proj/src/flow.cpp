#include "splitform/flow.hpp"

#include <algorithm>
#include <cmath>

namespace splitform {

namespace {

// Dormand-Prince 5(4) tableau
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
// difference between the 5th and the embedded 4th order weights
constexpr double kE[7] = {71.0 / 57600, 0.0,           -71.0 / 16695, 71.0 / 1920,
                          -17253.0 / 339200, 22.0 / 525, -1.0 / 40};

double error_norm(const JVecd& err, const JVecd& y0, const JVecd& y1, const FlowConfig& cfg) {
  double sum = 0.0;
  int count = 0;
  auto acc = [&](double e, double a, double b) {
    const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(a), std::abs(b));
    const double q = e / sc;
    sum += q * q;
    ++count;
  };
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    acc(err[i].v, y0[i].v, y1[i].v);
    for (int d = 0; d < Jetd::kMaxDirs; ++d) acc(err[i].g[d], y0[i].g[d], y1[i].g[d]);
    for (int k = 0; k < Jetd::kPacked; ++k) acc(err[i].h[k], y0[i].h[k], y1[i].h[k]);
  }
  return std::sqrt(sum / count);
}

JVecd lin_comb(const JVecd& y, double h, const JVecd* k[], const double* w, int n) {
  JVecd out = y;
  for (int j = 0; j < n; ++j) {
    if (w[j] == 0.0) continue;
    for (Eigen::Index i = 0; i < y.size(); ++i) out[i] += (h * w[j]) * (*k[j])[i];
  }
  return out;
}

}  // namespace

FlowResult integrate_ode(const OdeRhs& f, double s0, double s1, JVecd y0,
                         const FlowConfig& cfg, const Chart* guard) {
  if (!f) throw PreconditionError("integrate_ode: empty right-hand side");
  FlowResult res;
  res.state = std::move(y0);
  res.reached = s0;
  if (s1 == s0) return res;

  const double dir = s1 > s0 ? 1.0 : -1.0;
  double s = s0;
  double h = dir * std::min(std::abs(cfg.initial_step), std::abs(s1 - s0));

  JVecd k[7];
  while (res.steps < cfg.max_steps) {
    if (dir * (s + h - s1) > 0.0) h = s1 - s;

    k[0] = f(s, res.state);
    for (int stage = 1; stage < 7; ++stage) {
      const JVecd* kp[6];
      for (int j = 0; j < stage; ++j) kp[j] = &k[j];
      const JVecd ys = lin_comb(res.state, h, kp, kA[stage], stage);
      k[stage] = f(s + kC[stage] * h, ys);
    }
    // stage 6 input is already the 5th order solution (first-same-as-last)
    const JVecd* kp5[6];
    for (int j = 0; j < 6; ++j) kp5[j] = &k[j];
    const JVecd y_new = lin_comb(res.state, h, kp5, kA[6], 6);

    const JVecd* kpe[7];
    for (int j = 0; j < 7; ++j) kpe[j] = &k[j];
    const JVecd err = lin_comb(JVecd::Constant(res.state.size(), Jetd(0.0)), h, kpe, kE, 7);

    const double en = error_norm(err, res.state, y_new, cfg);
    if (en <= 1.0) {
      s += h;
      res.state = y_new;
      res.reached = s;
      ++res.steps;
      if (guard && guard->dim > 0 && !guard->contains(jet_values(res.state))) {
        res.escaped = true;
        return res;
      }
      if (dir * (s - s1) >= 0.0) return res;
    }
    const double scale = en > 0.0 ? 0.9 * std::pow(en, -0.2) : 5.0;
    h *= std::clamp(scale, 0.2, 5.0);
    if (std::abs(h) < cfg.min_step)
      throw NumericError("integrate_ode: step size underflow (trajectory may blow up)");
  }
  throw NumericError("integrate_ode: step budget exhausted");
}

FlowResult flow(const SmoothMap& X, double s, JVecd y0, const FlowConfig& cfg,
                const Chart* guard) {
  if (X.dim_in() != X.dim_out())
    throw PreconditionError("flow: field must map a chart to itself");
  if (y0.size() != X.dim_in()) throw PreconditionError("flow: state dimension mismatch");
  auto rhs = [&X](double, const JVecd& y) { return X(y); };
  return integrate_ode(rhs, 0.0, s, std::move(y0), cfg, guard);
}

SmoothMap flow_map(const SmoothMap& X, double s, const FlowConfig& cfg, Chart guard) {
  if (X.dim_in() != X.dim_out())
    throw PreconditionError("flow_map: field must map a chart to itself");
  const int n = X.dim_in();
  const bool guarded = guard.dim > 0;
  return SmoothMap(n, n, [X, s, cfg, guard, guarded](const JVecd& y) {
    FlowResult r = flow(X, s, y, cfg, guarded ? &guard : nullptr);
    if (r.escaped) throw NumericError("flow left the chart domain");
    return r.state;
  });
}

Eigen::VectorXd flow_point(const SmoothMap& X, double s, const Eigen::VectorXd& p,
                           const FlowConfig& cfg, const Chart* guard) {
  FlowResult r = flow(X, s, make_jets(p), cfg, guard);
  if (r.escaped) throw NumericError("flow left the chart domain");
  return jet_values(r.state);
}

Eigen::MatrixXd flow_jacobian(const SmoothMap& X, double s, const Eigen::VectorXd& p,
                              const FlowConfig& cfg) {
  const int n = X.dim_in();
  Eigen::MatrixXd J(n, n);
  for (int j0 = 0; j0 < n; j0 += Jetd::kMaxDirs) {
    const int k = std::min(Jetd::kMaxDirs, n - j0);
    std::vector<Eigen::VectorXd> dirs;
    for (int d = 0; d < k; ++d) dirs.push_back(Eigen::VectorXd::Unit(n, j0 + d));
    FlowResult r = flow(X, s, make_jets(p, dirs), cfg);
    if (r.escaped) throw NumericError("flow left the chart domain");
    J.block(0, j0, n, k) = jet_firsts(r.state, k);
  }
  return J;
}

FlowResult dilation_flow(const SmoothMap& X, double t, JVecd y0, const FlowConfig& cfg,
                         const Chart* guard) {
  if (!(t > 0.0)) throw PreconditionError("dilation_flow: t must be positive");
  return flow(X, std::log(t), std::move(y0), cfg, guard);
}

FlowResult timedep_flow(const TimeDepField& Z, double s0, double s1, JVecd y0,
                        const FlowConfig& cfg, const Chart* guard) {
  if (!Z.fj) throw PreconditionError("timedep_flow: empty field");
  if (y0.size() != Z.dim) throw PreconditionError("timedep_flow: state dimension mismatch");
  return integrate_ode(Z.fj, s0, s1, std::move(y0), cfg, guard);
}

}  // namespace splitform
