#pragma once

// Splitting machinery around a transversal: the cosymplectic solve for the
// primitive one-form, the scaling quadrature producing the transverse
// two-form, and verifiers that compare pulled-back structures against their
// product models (Poisson, Dirac, generalized complex).

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "splitform/dirac.hpp"
#include "splitform/euler.hpp"

namespace splitform {

struct QuadratureConfig {
  int nodes = 16;
  double doubling_tol = 1e-9;  // value change under node doubling
  FlowConfig flow;
};

struct NormalFormConfig {
  QuadratureConfig quad;
  LinearizeConfig lin;
  double section_tol = 1e-8;           // section-in-structure and vanishing checks
  double angle_tol = 1e-6;             // principal angle of the normal form
  double closed_tol = 1e-7;            // d omega against the twist difference
  double boundary_tangent_tol = 1e-8;  // omega kernel along the transversal
  double boundary_inverse_tol = 1e-6;  // omega against the inverse pairing
  double family_tol = 1e-6;            // scaling-family independence
  double push_tol = 1e-6;              // bivector pushforward and block checks
  double eigen_tol = 1e-8;             // J eps = i eps
  double cond_guard = 1e8;
  std::vector<double> family_ts = {1.0, 0.5, 0.25};
};

struct SplitCheck {
  std::string name;
  double residual = 0.0;
  double tol = 0.0;
  bool pass = false;
  std::vector<double> samples;  // per-point residuals when the check is pointwise
};

struct SplittingReport {
  std::vector<SplitCheck> checks;
  bool pass = true;

  void add(const std::string& name, double residual, double tol);
  void add(const std::string& name, std::vector<double> samples, double tol);
  const SplitCheck* find(const std::string& name) const;
};

/// k x k matrix of pairings pi(dx^i, dx^j) over the conormal directions of
/// the transversal, evaluated at base point y.
Eigen::MatrixXd ann_pairing(const Bivector& pi, const Transversal& nu, const Eigen::VectorXd& y);

/// True iff the conormal pairing is invertible (condition number below the
/// guard) at every given base point.
bool cosymplectic_check(const Bivector& pi, const Transversal& nu,
                        const std::vector<Eigen::VectorXd>& base_points,
                        double cond_guard = 1e8);

/// The one-form alpha = sum_j x^j mu^j(y) whose conormal coefficients solve
/// the normal-projection problem, so that pi-sharp of alpha is Euler-like.
OneForm alpha_for_cosymplectic(const Bivector& pi, const Transversal& nu);

/// pi-sharp applied to a symbolic one-form, as a vector field.
VectorField sharp_field(const Bivector& pi, const OneForm& alpha);

/// Pullback of the ambient three-form to the zero section and back up the
/// bundle projection: keeps base-direction components at x = 0 only.
ThreeForm base_pullback(const ThreeForm& eta, const Transversal& nu);

/// The two-form obtained by integrating the scaled pullbacks of
/// d alpha + iota_X eta along the dilation family.  Every evaluation runs the
/// quadrature at the configured rule and its doubled rule and requires
/// agreement; disagreement throws NumericError.
TwoFormEval omega_quadrature(const OneForm& alpha, const VectorField& X, const ThreeForm& eta,
                             const TubularEmbedding& emb, const QuadratureConfig& cfg = {});

/// Same integral truncated to dilation parameters in [t_lo, 1].
TwoFormEval omega_quadrature_tail(const OneForm& alpha, const VectorField& X,
                                  const ThreeForm& eta, const TubularEmbedding& emb,
                                  double t_lo, const QuadratureConfig& cfg = {});

/// Max residual of d omega against the pullback difference of the twist.
double omega_closedness_residual(const TwoFormEval& omega, const ThreeForm& eta,
                                 const TubularEmbedding& emb,
                                 const std::vector<Eigen::VectorXd>& pts);

struct OmegaBoundary {
  double tangent_residual = 0.0;  // pairings with transversal directions
  double inverse_residual = 0.0;  // normal block times conormal pairing minus id
};

/// Boundary behavior of the quadrature two-form along the transversal.
OmegaBoundary omega_boundary(const TwoFormEval& omega, const Bivector& pi, const Transversal& nu,
                             const std::vector<Eigen::VectorXd>& base_points);

/// Compares the pullback of the Dirac structure through the embedding induced
/// by the section eps = X + alpha against the gauge-transformed product model.
/// When a bivector is supplied its conormal pairing enters the boundary row.
SplittingReport dirac_normal_form(const DiracFrame& E, const TwistedCourant& bg,
                                  const Transversal& nu, const CourantSection& eps,
                                  const std::vector<Eigen::VectorXd>& pts,
                                  const NormalFormConfig& cfg = {},
                                  const Bivector* pi = nullptr);

/// Splits a Poisson structure along a cosymplectic transversal: pushforward of
/// the pointwise model bivector, block structure against the transverse
/// bivector, and normalization of the symplectic block.
SplittingReport weinstein_split(const Bivector& pi, const Transversal& nu,
                                const std::vector<Eigen::VectorXd>& pts,
                                const NormalFormConfig& cfg = {});

/// Splits a generalized complex structure along a transversal that is
/// cosymplectic for its induced bivector, comparing against the model gauged
/// by the imaginary quadrature form and the real correction form.
SplittingReport gcs_normal_form(const GCSData& J, const Transversal& nu,
                                const std::vector<Eigen::VectorXd>& pts,
                                const NormalFormConfig& cfg = {});

}  // namespace splitform
