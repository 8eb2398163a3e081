#pragma once

// Normal-form machinery for vector fields that vanish on a submanifold
// N = {x = 0} and whose normal linearization is the identity (the fibrewise
// dilation generator).  For such a field the rescaled homotopy family has a
// smooth limit at t = 0, and integrating it from 0 to 1 produces the
// diffeomorphism psi that intertwines the fibrewise dilations with the flow
// of the field: psi o kappa_t = lambda_t o psi and psi_* (fibre position
// field) = X.

#include <vector>

#include <Eigen/Dense>

#include "splitform/chart.hpp"
#include "splitform/flow.hpp"

namespace splitform {

/// Fibrewise position field (0, x) on the adapted chart of nu.
SmoothMap fiber_euler(const Transversal& nu);

/// k x k matrix of x-derivatives of the x-components of X at (y, 0).
Eigen::MatrixXd normal_derivative(const SmoothMap& X, const Transversal& nu,
                                  const Eigen::VectorXd& y);

struct EulerLikeReport {
  double max_value_residual = 0.0;   // |X| sampled on N
  double max_normal_residual = 0.0;  // |d^N X - id| sampled on N
  bool pass = false;
};

/// Samples the two defining conditions at the given base points.
EulerLikeReport is_euler_like(const SmoothMap& X, const Transversal& nu,
                              const std::vector<Eigen::VectorXd>& base_points, double tol);

/// The homotopy field driving the linearization: conjugate X by the dilation
/// kappa_t, remove the fibre position part and divide by t.  Near t = 0 the
/// evaluation time is clamped at t_min; the family is smooth there, so the
/// substitution costs O(t_min^2).
JVecd evaluate_Zt(const SmoothMap& X, const Transversal& nu, double t, const JVecd& v,
                  double t_min = 1e-4);

struct LinearizeConfig {
  double euler_tol = 1e-6;  // admissibility threshold for the field test
  double t_min = 1e-4;
  FlowConfig flow;
  std::vector<Eigen::VectorXd> check_points;  // base points; default lattice if empty
  double newton_tol = 1e-12;
  int newton_max_iter = 50;
};

/// The linearizing diffeomorphism of an admissible field together with its
/// inverse and the associated dilation semigroup.
class TubularEmbedding {
 public:
  TubularEmbedding(SmoothMap X, Transversal nu, LinearizeConfig cfg);

  const SmoothMap& field() const { return X_; }
  const Transversal& transversal() const { return nu_; }
  const LinearizeConfig& config() const { return cfg_; }

  /// psi: time-1 solution of the homotopy ODE, jets transported exactly.
  SmoothMap psi() const;
  /// Damped Newton inverse with implicit-function jets.
  SmoothMap psi_inverse() const;
  /// lambda_t: the time log(t) flow of the field, t > 0.
  SmoothMap dilation(double t) const;

  /// Independent construction of psi: undo the flow after shrinking into the
  /// fibre, then extrapolate t -> 0.  Converges linearly, so successive
  /// Richardson levels are applied.
  Eigen::VectorXd psi_via_scaling_flow(const Eigen::VectorXd& v, double t0 = 0.5,
                                       int levels = 5) const;
  /// Independent inverse: base limit and linear rate of the dilation orbit.
  Eigen::VectorXd psi_inverse_via_dilation(const Eigen::VectorXd& m, double t0 = 0.5,
                                           int levels = 5) const;

  /// max |Dpsi(v) E(v) - X(psi(v))| over the sample points.
  double pushforward_residual(const std::vector<Eigen::VectorXd>& pts) const;
  /// max |psi(kappa_t v) - lambda_t(psi(v))| over points and dilation times.
  double intertwine_residual(const std::vector<Eigen::VectorXd>& pts,
                             const std::vector<double>& ts) const;

 private:
  SmoothMap X_;
  Transversal nu_;
  LinearizeConfig cfg_;
};

/// Validates the admissibility conditions, then builds the embedding.
/// Fields failing the conditions are rejected with PreconditionError.
TubularEmbedding linearize(const SmoothMap& X, const Transversal& nu,
                           const LinearizeConfig& cfg = {});

}  // namespace splitform
