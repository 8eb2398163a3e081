#pragma once

// Anchored vector bundles and Lie algebroids trivialized over a chart,
// E = chart x R^r.  Provides the Euler-like section of a transversal, the
// torsion-corrected anchor lift D_sigma on anchored bundles, the bracket lift
// on Lie algebroids, and the linearizing bundle map over the tubular
// embedding: fibres are transported along the scaling flow and the limit
// frame, paired with the inverse tangent map of the embedding, identifies the
// bundle near the transversal with the pulled-back product model.

#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "splitform/chart.hpp"
#include "splitform/euler.hpp"

namespace splitform {

/// Section of the trivialized bundle: r coefficient expressions in the frame
/// e_1..e_r.
struct Section {
  std::vector<Expr> comps;

  static Section zero(int rank);
  static Section basis(int rank, int i);

  int rank() const { return static_cast<int>(comps.size()); }
  Eigen::VectorXd value(const Eigen::VectorXd& p) const;
};

/// E = chart x R^r with anchor a: E -> T(chart).  The anchor is stored as the
/// n x r matrix over expressions whose j-th column gives the components of
/// a(e_j).
struct AnchoredBundle {
  Chart chart;
  int rank = 0;
  std::vector<Expr> anchor;  // row-major n x r

  static AnchoredBundle tangent(const Chart& chart);

  const Expr& anchor_entry(int row, int col) const;
  Eigen::MatrixXd anchor_matrix(const Eigen::VectorXd& p) const;
  /// a(e_j) as a symbolic vector field.
  VectorField frame_field(int j) const;
  /// X = a(s), assembled symbolically.
  VectorField anchor_apply(const Section& s) const;
  /// Directional derivative a(e_j)(f) as an expression.
  Expr frame_derivative(int j, const Expr& f) const;
};

/// Anchored bundle with structure functions [e_i, e_j] = sum_k c^k_{ij} e_k,
/// extended to arbitrary sections by the Leibniz rule.
struct LieAlgebroid {
  AnchoredBundle bundle;
  std::vector<Expr> structure;  // pair-packed over i<j, r entries each

  int rank() const { return bundle.rank; }
  void set_structure(int k, int i, int j, const Expr& e);  // i != j, signed store
  Expr structure_fn(int k, int i, int j) const;            // signed component
};

/// Tangent algebroid TM: identity anchor, vanishing structure functions.
LieAlgebroid tangent_algebroid(const Chart& chart);

/// Cotangent algebroid of a bivector: anchor mu |-> pi(mu, .), structure
/// functions c^k_{ij} = d_k pi^{ij}.  A Lie algebroid exactly when pi is
/// Poisson; run validate_algebroid to confirm.
LieAlgebroid cotangent_algebroid(const Bivector& pi);

/// [sigma, tau] at p through the structure functions and the Leibniz rule.
Eigen::VectorXd bracket_apply(const LieAlgebroid& L, const Section& sigma, const Section& tau,
                              const Eigen::VectorXd& p);

struct AlgebroidCheck {
  double max_anchor_residual = 0.0;  // a([e_i,e_j]) vs [a(e_i), a(e_j)]
  double max_jacobi_residual = 0.0;  // frame Jacobi identity
  bool pass = false;
};

/// Samples the anchor-morphism property and the Jacobi identity on the frame.
AlgebroidCheck validate_algebroid(const LieAlgebroid& L, const std::vector<Eigen::VectorXd>& pts,
                                  double tol = 1e-8);

/// True iff span(a) + TN = T(chart) at every sampled base point (rank of the
/// concatenated matrix).  Base points are y-coordinate vectors on N.
bool check_transversal(const AnchoredBundle& E, const Transversal& nu,
                       const std::vector<Eigen::VectorXd>& base_points, double tol = 1e-8);

/// Section vanishing on N whose anchor image is Euler-like: eps = sum_j x^j
/// xi_j(y), with xi_j(y) the minimum-norm preimage of the j-th normal
/// direction under the normal block of the anchor at (y, 0).  The pointwise
/// solve is carried out symbolically through the adjugate, so the result is
/// a closed-form section.  Throws PreconditionError when the anchor is not
/// transverse to N near the chart center.
Section euler_section(const AnchoredBundle& E, const Transversal& nu);

/// D_sigma tau evaluated at a point; shared shape for the connection-based
/// and the bracket-based lifts.
using SectionOperator =
    std::function<Eigen::VectorXd(const Section&, const Section&, const Eigen::VectorXd&)>;

/// Lift of the anchor through the trivial a-connection corrected by a
/// pointwise minimum-norm torsion lift:
///   D_sigma tau = nabla_sigma tau - nabla_tau sigma - S(sigma, tau),
/// where a(S(e_i, e_j)) = -[a(e_i), a(e_j)] up to the least-squares residual.
/// The residual doubles as the involutivity test for the bundle.
class AnchorLift {
 public:
  explicit AnchorLift(AnchoredBundle E);

  const AnchoredBundle& bundle() const { return E_; }

  /// S(e_i, e_j) at p (antisymmetric in i, j).
  Eigen::VectorXd torsion_lift(const Eigen::VectorXd& p, int i, int j) const;
  /// max over frame pairs of |a S(e_i,e_j) + [a(e_i), a(e_j)]|.
  double lift_residual(const Eigen::VectorXd& p) const;

  Eigen::VectorXd apply(const Section& sigma, const Section& tau, const Eigen::VectorXd& p) const;
  /// Matrix with columns D_eps e_i at p.
  Eigen::MatrixXd frame_operator(const Section& eps, const Eigen::VectorXd& p) const;

  SectionOperator op() const;

 private:
  /// All pair lifts at p through one decomposition of the anchor; columns in
  /// pair-packed order.
  Eigen::MatrixXd lifts_matrix(const Eigen::VectorXd& p, double* max_residual) const;

  AnchoredBundle E_;
  std::vector<VectorField> frame_fields_;  // a(e_j)
  std::vector<VectorField> torsion_;       // -[a(e_i), a(e_j)], pair-packed i<j
};

/// Validates involutivity at the sample points, then returns the lift.
AnchorLift anchor_lift_connection(const AnchoredBundle& E, const std::vector<Eigen::VectorXd>& pts,
                                  double tol = 1e-8);

struct LiftReport {
  double max_derivation_residual = 0.0;  // D_sigma(f tau) - f D_sigma tau - (a(sigma)f) tau
  double max_anchor_residual = 0.0;      // a(D_sigma tau) - [a(sigma), a(tau)]
  double max_module_residual = 0.0;      // D_{f sigma} tau - f D_sigma tau + (a(tau)f) sigma
  bool pass = false;
};

/// Checks the derivation property, anchor compatibility and the module rule
/// on the supplied sections, test functions and points.
LiftReport check_lift_contracts(const AnchoredBundle& E, const SectionOperator& D,
                                const std::vector<Section>& sigmas, const std::vector<Section>& taus,
                                const std::vector<Expr>& fs, const std::vector<Eigen::VectorXd>& pts,
                                double tol = 1e-8);

/// Frame matrix C of an operator D_eps: (D_eps e_i)^k = C^k_i, with entries
/// held as expressions.
struct FrameOperatorField {
  int rank = 0;
  std::vector<Expr> entries;  // row-major r x r

  Eigen::MatrixXd value(const Eigen::VectorXd& p) const;
};

/// C for the bracket lift D_eps = [eps, .]:
///   C^k_i = sum_j f^j c^k_{ji} - a(e_i)(f^k),  eps = sum_j f^j e_j.
FrameOperatorField bracket_lift(const LieAlgebroid& L, const Section& eps);

/// Pointwise frames for i!E (anchor preimage of TN along the transversal) and
/// for the fibre product p!i!E over the tube.  Frames vary smoothly: a fixed
/// kernel basis at the chart center is projected onto the kernel at y and
/// re-orthonormalized.
class PullbackBundle {
 public:
  PullbackBundle(AnchoredBundle E, Transversal nu, double tol = 1e-8);

  int fiber_dim() const { return fdim_; }  // rank - normal_dim

  /// r x fiber_dim basis of ker(normal anchor block) at (y, 0).
  Eigen::MatrixXd ie_frame(const Eigen::VectorXd& y) const;
  /// (r + n) x r basis of the fibre-product fibre at v: first r rows hold the
  /// i!E coefficients, the remaining n the tangent vector at v.
  Eigen::MatrixXd pie_frame(const Eigen::VectorXd& v) const;

  /// How far (xi, w) is from the fibre-product conditions over base y:
  /// normal anchor rows of xi must vanish and the base rows must match w.
  double membership_residual(const Eigen::VectorXd& y, const Eigen::VectorXd& xi,
                             const Eigen::VectorXd& w) const;

 private:
  AnchoredBundle E_;
  Transversal nu_;
  double tol_ = 1e-8;
  int fdim_ = 0;
  Eigen::MatrixXd ref_kernel_;
};

struct AlgebroidConfig {
  LinearizeConfig linearize;
  FlowConfig transport;
  double s_horizon = 40.0;     // scaling-flow horizon for the frame limit
  double converge_tol = 1e-9;  // early exit once the frame stops moving
  double frame_tol = 1e-8;
};

/// The normal-form bundle map.  The fibre transport solves
///   dA/ds = -C(Phi_s(m)) A,  A(0) = id,
/// along the flow of X = a(eps); lambda-tilde at parameter t is the transport
/// evaluated at s = log t, and the t -> 0 limit is integrated out to the
/// configured horizon.  The map xi |-> (limit frame applied to xi, inverse
/// tangent map of psi applied to a(xi)) lands in the fibre product, and
/// psi-tilde is its least-squares inverse.
class AlgebroidNormalForm {
 public:
  AlgebroidNormalForm(AnchoredBundle E, Transversal nu, Section eps,
                      std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> frame_op,
                      AlgebroidConfig cfg = {});

  const TubularEmbedding& embedding() const { return emb_; }
  const PullbackBundle& pullback() const { return pb_; }
  const SmoothMap& psi() const { return psi_; }

  struct Transport {
    Eigen::VectorXd base;         // lambda_t of the start point
    Eigen::MatrixXd frame;        // r x r fibre matrix of lambda-tilde_t
    Eigen::MatrixXd base_tangent; // n x n tangent matrix of lambda_t
  };
  /// t in [0, 1]; t = 0 integrates to the horizon with early exit.
  Transport lambda_transport(const Eigen::VectorXd& m, double t) const;

  struct FiberMap {
    Eigen::VectorXd v, m, y;
    Eigen::MatrixXd lambda0;     // r x r
    Eigen::MatrixXd tpsi_inv_a;  // n x r
    double base_drift = 0.0;     // |limit base - (y, 0)|
  };
  FiberMap fiber_map(const Eigen::VectorXd& v) const;

  /// xi at psi(v) |-> (i!E part, tangent part).
  std::pair<Eigen::VectorXd, Eigen::VectorXd> forward(const Eigen::VectorXd& v,
                                                      const Eigen::VectorXd& xi) const;
  /// Least-squares inverse of forward on its image.
  Eigen::VectorXd psi_tilde(const Eigen::VectorXd& v, const Eigen::VectorXd& eta,
                            const Eigen::VectorXd& w) const;
  Eigen::VectorXd psi_tilde(const FiberMap& fm, const Eigen::VectorXd& eta,
                            const Eigen::VectorXd& w) const;

  /// max fibre-product membership residual of forward over the frame.
  double image_residual(const std::vector<Eigen::VectorXd>& vpts) const;
  /// max |forward(psi_tilde(b)) - b| over the model frame: how well psi-tilde
  /// inverts on the fibre product, anchor matching included.
  double round_trip_residual(const std::vector<Eigen::VectorXd>& vpts) const;
  /// max |a(lambda-tilde_t xi) - T lambda_t a(xi)| over points, frame and ts
  /// (ts entries in [0, 1]; 0 selects the limit).
  double anchor_residual(const std::vector<Eigen::VectorXd>& vpts,
                         const std::vector<double>& ts) const;

 private:
  AnchoredBundle E_;
  Transversal nu_;
  Section eps_;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> frame_op_;
  AlgebroidConfig cfg_;
  VectorField X_;
  std::vector<Expr> dX_;  // row-major n x n derivatives of X
  TubularEmbedding emb_;
  PullbackBundle pb_;
  SmoothMap psi_;
};

/// Lie algebroid path: D_eps from the bracket lift.
AlgebroidNormalForm algebroid_normal_form(const LieAlgebroid& L, const Transversal& nu,
                                          const Section& eps, const AlgebroidConfig& cfg = {});
/// Anchored path: D_eps from a torsion-corrected connection lift.
AlgebroidNormalForm algebroid_normal_form(const AnchoredBundle& E, const AnchorLift& lift,
                                          const Transversal& nu, const Section& eps,
                                          const AlgebroidConfig& cfg = {});

/// Model-bracket comparison for a Lie algebroid normal form: brackets of the
/// transported product-frame sections against the transported model brackets,
/// with coefficient derivatives taken by central differences.
double bracket_residual(const AlgebroidNormalForm& nf, const LieAlgebroid& L,
                        const std::vector<Eigen::VectorXd>& vpts, double fd_step = 1e-3);

}  // namespace splitform
