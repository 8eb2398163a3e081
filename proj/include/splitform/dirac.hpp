#pragma once

// The double tangent bundle TM + T*M carrying the eta-twisted bracket and the
// symmetric pairing <X1+a1, X2+a2> = a1(X2) + a2(X1).  Dirac structures are
// presented as frames of sections; derived structures (pullbacks, gauge
// transforms of quadrature forms) are pointwise frame evaluators.  Complex
// frames reuse the same expressions with complex constants and are evaluated
// through complex arithmetic.

#include <complex>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "splitform/chart.hpp"
#include "splitform/flow.hpp"

namespace splitform {

/// Element X + alpha of the double tangent bundle.
struct CourantSection {
  VectorField X;
  OneForm alpha;

  static CourantSection zero(const Chart& chart);
  static CourantSection of_field(const VectorField& X);
  static CourantSection of_form(const OneForm& a);

  int dim() const { return X.chart.dim; }
  /// Stacked evaluation, vector components above form components.
  Eigen::VectorXcd value_c(const Eigen::VectorXd& p) const;
};

/// Background of the bracket: a chart plus a closed 3-form twist.
struct TwistedCourant {
  Chart chart;
  ThreeForm eta;

  static TwistedCourant untwisted(const Chart& chart);
};

/// max |d eta| over the sample points; identically zero below dimension 4.
double twist_closedness_residual(const TwistedCourant& bg,
                                 const std::vector<Eigen::VectorXd>& pts);

Expr pairing(const CourantSection& s1, const CourantSection& s2);

/// [X1,X2] + L_{X1} a2 - iota_{X2} d a1 + iota_{X1} iota_{X2} eta.
CourantSection courant_bracket(const CourantSection& s1, const CourantSection& s2,
                               const TwistedCourant& bg);

/// Gauge transform v + mu -> v + mu + iota_v omega.
CourantSection bfield(const TwoForm& omega, const CourantSection& s);

struct DiracFrame {
  enum class Mode { kReal, kComplex };

  Chart chart;
  Mode mode = Mode::kReal;
  std::vector<CourantSection> sections;

  int dim() const { return chart.dim; }
  int rank() const { return static_cast<int>(sections.size()); }
  /// (2n) x rank stacked frame matrix at a point.
  Eigen::MatrixXcd matrix_c(const Eigen::VectorXd& p) const;
};

DiracFrame bfield(const TwoForm& omega, const DiracFrame& E);

struct DiracReport {
  double max_pairing_residual = 0.0;       // isotropy
  double min_rank_gap = 0.0;               // smallest n-th singular value seen
  double max_involutivity_residual = 0.0;  // bracket sections vs span
  double min_split_gap = 0.0;              // E vs conj(E) transversality (complex only)
  bool pass = false;
};

/// Samples the Dirac structure conditions.  With check_split set (complex
/// frames), also requires E and its conjugate to intersect trivially.
DiracReport validate_dirac(const DiracFrame& E, const TwistedCourant& bg,
                           const std::vector<Eigen::VectorXd>& pts, double tol = 1e-8,
                           bool check_split = false);

/// Frame {pi^sharp(dx^a) + dx^a}; requires the jacobiator to vanish at the
/// sample points.
DiracFrame graph_of_bivector(const Bivector& pi, const std::vector<Eigen::VectorXd>& pts,
                             double tol = 1e-8);
/// Frame {d/dx^a + iota_{d/dx^a} omega}; requires d omega + eta = 0 at samples.
DiracFrame graph_of_twoform(const TwoForm& omega, const TwistedCourant& bg,
                            const std::vector<Eigen::VectorXd>& pts, double tol = 1e-8);

// ---------------------------------------------------------------------------
// pointwise frames

/// Frame-matrix evaluator for structures with no symbolic presentation
/// (pullbacks, gauge transforms by quadrature two-forms).
struct FrameField {
  Chart chart;
  int rank = 0;
  std::function<Eigen::MatrixXcd(const Eigen::VectorXd&)> frame;
};

FrameField as_frame_field(const DiracFrame& E);

/// Pullback along phi: columns (v', mu') with T phi(v') matched against the
/// vector parts and mu' = (T phi)^* mu.  Throws PreconditionError when the
/// pointwise solve does not have the expected rank (transversality failure).
FrameField pullback_dirac(const SmoothMap& phi, const Chart& source, const FrameField& E,
                          double tol = 1e-8);
FrameField pullback_dirac(const SmoothMap& phi, const Chart& source, const DiracFrame& E,
                          double tol = 1e-8);

FrameField bfield(const TwoForm& omega, const FrameField& E);
FrameField bfield(const TwoFormEval& omega, const FrameField& E);
/// Gauge by scale * omega (complex scale; used for sqrt(-1) gauges).
FrameField bfield_scaled(std::complex<double> scale, const TwoFormEval& omega,
                         const FrameField& E);

/// Largest principal angle between the column spans (radians).
double principal_angle(const Eigen::MatrixXcd& A, const Eigen::MatrixXcd& B);

double frame_distance(const FrameField& A, const FrameField& B,
                      const std::vector<Eigen::VectorXd>& pts);

/// Reads a graph bivector off a frame: pi^T = V U^{-1} for frame (V; U).
/// Throws NumericError when the form block U is near-singular.
Eigen::MatrixXcd frame_to_bivector(const Eigen::MatrixXcd& M, double tol = 1e-10);

// ---------------------------------------------------------------------------
// generalized complex structures

/// Real bundle map J on TM + T*M in stacked coordinates, J^2 = -id,
/// orthogonal for the pairing.
struct GCSData {
  Chart chart;
  std::vector<Expr> J;  // row-major 2n x 2n

  int dim() const { return chart.dim; }
  const Expr& entry(int row, int col) const;
  Eigen::MatrixXd matrix(const Eigen::VectorXd& p) const;
};

struct GCSReport {
  double max_square_residual = 0.0;         // J^2 + id
  double max_orthogonality_residual = 0.0;  // pairing invariance
  DiracReport eigenframe;
  bool pass = false;
};

GCSReport validate_gcs(const GCSData& J, const std::vector<Eigen::VectorXd>& pts,
                       double tol = 1e-8);

/// +sqrt(-1) eigenbundle as a complex Dirac frame: n generators u - i J u
/// selected by column-pivoted QR at the chart centre.
DiracFrame gcs_eigenbundle(const GCSData& J);

/// pi^sharp(mu) = anchor(J mu), extracted columnwise.
Bivector gcs_induced_poisson(const GCSData& J);

GCSData gcs_from_symplectic(const TwoForm& omega);
GCSData gcs_from_complex_structure(const Chart& chart, const std::vector<Expr>& j);
/// Block sum on the concatenated (unguarded) chart; second factor variables
/// are shifted past the first.
GCSData gcs_direct_sum(const GCSData& a, const GCSData& b);
GCSData bfield(const TwoForm& omega, const GCSData& J);

// ---------------------------------------------------------------------------
// gauge flow

struct GaugeFlowConfig {
  FlowConfig flow;
  int nodes = 16;            // Gauss-Legendre nodes for the gamma quadrature
  double section_tol = 1e-8; // membership threshold for sigma in E
};

/// Transports E by the generalized tangent map of the time-s flow of the
/// vector part of sigma and compares with the gauge transform by
/// gamma_s = int_0^s pullback of (d alpha + iota_X eta).  Returns the largest
/// principal angle over the sample points.  The vector part must be real.
double gauge_flow_check(const CourantSection& sigma, double s, const DiracFrame& E,
                        const TwistedCourant& bg, const std::vector<Eigen::VectorXd>& pts,
                        const GaugeFlowConfig& cfg = {});

/// The quadrature two-form gamma_s itself, evaluated at a point.
Eigen::MatrixXd gauge_form(const CourantSection& sigma, double s, const TwistedCourant& bg,
                           const Eigen::VectorXd& p, const GaugeFlowConfig& cfg = {});

}  // namespace splitform
