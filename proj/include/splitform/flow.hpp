#pragma once

// Adaptive Dormand-Prince integration of vector fields whose state carries
// order-2 jets.  Integrating seeded jets transports first and second
// derivatives of the flow alongside the trajectory, so flow maps compose with
// the rest of the evaluation machinery like any other SmoothMap.

#include <functional>

#include <Eigen/Dense>

#include "splitform/chart.hpp"
#include "splitform/errors.hpp"
#include "splitform/jet.hpp"

namespace splitform {

struct FlowConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-10;
  double initial_step = 1e-2;
  double min_step = 1e-12;
  int max_steps = 200000;
};

struct FlowResult {
  JVecd state;
  double reached = 0.0;  // integration time actually attained
  bool escaped = false;  // stopped early after leaving the chart guard
  int steps = 0;
};

/// Right-hand side of a (possibly time-dependent) ODE on jet state.
using OdeRhs = std::function<JVecd(double, const JVecd&)>;

/// Integrates dy/ds = f(s, y) from s0 to s1 (either direction).  If a guard
/// chart is supplied and the value part leaves it, integration stops at the
/// last accepted step with escaped = true.  Unrecoverable step-size collapse
/// throws NumericError.
FlowResult integrate_ode(const OdeRhs& f, double s0, double s1, JVecd y0,
                         const FlowConfig& cfg = {}, const Chart* guard = nullptr);

/// Time-s flow of an autonomous field (dimensions must agree).
FlowResult flow(const SmoothMap& X, double s, JVecd y0, const FlowConfig& cfg = {},
                const Chart* guard = nullptr);

/// The flow as a smooth map; escaping the guard throws NumericError here.
SmoothMap flow_map(const SmoothMap& X, double s, const FlowConfig& cfg = {},
                   Chart guard = Chart{});

/// Flow evaluated at a plain point.
Eigen::VectorXd flow_point(const SmoothMap& X, double s, const Eigen::VectorXd& p,
                           const FlowConfig& cfg = {}, const Chart* guard = nullptr);

/// Full Jacobian of the time-s flow, assembled from batched jet transports.
Eigen::MatrixXd flow_jacobian(const SmoothMap& X, double s, const Eigen::VectorXd& p,
                              const FlowConfig& cfg = {});

/// One map of the dilation family generated by X: the time log(t) flow,
/// defined for t > 0.  For the position field this is multiplication by t.
FlowResult dilation_flow(const SmoothMap& X, double t, JVecd y0, const FlowConfig& cfg = {},
                         const Chart* guard = nullptr);

struct TimeDepField {
  int dim = 0;
  std::function<JVecd(double, const JVecd&)> fj;
};

/// Integrates dx/ds = Z(s, x) between the given times.
FlowResult timedep_flow(const TimeDepField& Z, double s0, double s1, JVecd y0,
                        const FlowConfig& cfg = {}, const Chart* guard = nullptr);

}  // namespace splitform
