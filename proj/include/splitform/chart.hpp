#pragma once

// Coordinate charts, adapted transversals, tensor fields with expression
// components, and the exterior-calculus operations the normal-form pipeline
// is built from.
//
// Two evaluation layers coexist:
//   * symbolic: fields with Expr components support exact structural
//     derivatives, substitution and coordinate changes, and evaluate at any
//     jet order;
//   * directional evaluators (OneFormEval, TwoFormEval, ThreeFormEval):
//     closures exposing the value and, when available, first and second
//     directional derivatives against constant direction vectors.  Maps
//     defined only numerically (flows, quadratures) enter here; operations
//     that would need an unavailable derivative level leave that level empty.

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "splitform/errors.hpp"
#include "splitform/expr.hpp"
#include "splitform/jet.hpp"

namespace splitform {

// ---------------------------------------------------------------------------
// charts

struct Chart {
  enum class Guard { kNone, kBall, kBox };

  int dim = 0;
  Guard guard = Guard::kNone;
  Eigen::VectorXd center;  // ball guard
  double radius = 0.0;
  Eigen::VectorXd lo, hi;  // box guard

  static Chart unguarded(int dim);
  static Chart ball(int dim, Eigen::VectorXd center, double radius);
  static Chart box(Eigen::VectorXd lo, Eigen::VectorXd hi);

  bool contains(const Eigen::VectorXd& p) const;
};

/// Adapted chart around a submanifold N = {x = 0}: coordinates are ordered
/// (y^1..y^p, x^1..x^k) with y along N and x normal to it.
struct Transversal {
  Chart chart;
  int leaf_dim = 0;  // p

  int dim() const { return chart.dim; }
  int normal_dim() const { return chart.dim - leaf_dim; }

  Eigen::VectorXd embed(const Eigen::VectorXd& y, const Eigen::VectorXd& x) const;
  Eigen::VectorXd base_part(const Eigen::VectorXd& v) const;    // y components
  Eigen::VectorXd normal_part(const Eigen::VectorXd& v) const;  // x components
  bool on_base(const Eigen::VectorXd& v, double tol = 0.0) const;

  /// Fibrewise dilation (y, x) -> (y, t x).
  Eigen::VectorXd dilate(double t, const Eigen::VectorXd& v) const;
  Eigen::MatrixXd dilation_matrix(double t) const;
};

// ---------------------------------------------------------------------------
// smooth maps evaluated through jets

/// A map between chart domains whose canonical evaluation pushes order-2 jets
/// through.  Compositions, Jacobians and contracted second derivatives all
/// derive from that single closure.
class SmoothMap {
 public:
  using JetFn = std::function<JVecd(const JVecd&)>;

  SmoothMap() = default;
  SmoothMap(int dim_in, int dim_out, JetFn fn);

  static SmoothMap from_exprs(std::vector<Expr> comps, int dim_in);
  static SmoothMap identity(int dim);
  static SmoothMap affine(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);
  static SmoothMap linear(const Eigen::MatrixXd& A);

  bool valid() const { return static_cast<bool>(fn_); }
  int dim_in() const { return dim_in_; }
  int dim_out() const { return dim_out_; }

  JVecd operator()(const JVecd& in) const;
  JVecd jets(const Eigen::VectorXd& p, const std::vector<Eigen::VectorXd>& dirs = {}) const;

  Eigen::VectorXd value(const Eigen::VectorXd& p) const;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& p) const;
  /// Second derivative D^2 f(p)[u, v].
  Eigen::VectorXd hessian_dir(const Eigen::VectorXd& p, const Eigen::VectorXd& u,
                              const Eigen::VectorXd& v) const;

  /// outer(this(.)).
  SmoothMap then(const SmoothMap& outer) const;

 private:
  int dim_in_ = 0, dim_out_ = 0;
  JetFn fn_;
};

/// [X, Y] evaluated at p together with first derivatives along at most two
/// directions; second-order jet parts of the result are not populated.
JVecd lie_bracket_jets(const SmoothMap& X, const SmoothMap& Y, const Eigen::VectorXd& p,
                       const std::vector<Eigen::VectorXd>& dirs = {});

// ---------------------------------------------------------------------------
// antisymmetric index packing

namespace detail {
inline int pair_count(int n) { return n * (n - 1) / 2; }
inline int pair_index(int i, int j, int n) { return i * n - i * (i + 1) / 2 + (j - i - 1); }
inline int triple_count(int n) { return n * (n - 1) * (n - 2) / 6; }
int triple_index(int i, int j, int k, int n);

/// Determinant of a row-major k x k expression matrix (Laplace expansion).
Expr expr_det(const std::vector<Expr>& M, int k);
/// Adjugate with M * adj = det(M) * id.
std::vector<Expr> expr_adjugate(const std::vector<Expr>& M, int k);
}  // namespace detail

// ---------------------------------------------------------------------------
// directional form evaluators

struct OneFormEval {
  int dim = 0;
  std::function<double(const Eigen::VectorXd& p, const Eigen::VectorXd& u)> val;
  std::function<double(const Eigen::VectorXd& p, const Eigen::VectorXd& u,
                       const Eigen::VectorXd& w)> d1;
  std::function<double(const Eigen::VectorXd& p, const Eigen::VectorXd& u,
                       const Eigen::VectorXd& w1, const Eigen::VectorXd& w2)> d2;
};

struct TwoFormEval {
  int dim = 0;
  std::function<double(const Eigen::VectorXd& p, const Eigen::VectorXd& u,
                       const Eigen::VectorXd& v)> val;
  std::function<double(const Eigen::VectorXd& p, const Eigen::VectorXd& u,
                       const Eigen::VectorXd& v, const Eigen::VectorXd& w)> d1;
  std::function<double(const Eigen::VectorXd& p, const Eigen::VectorXd& u,
                       const Eigen::VectorXd& v, const Eigen::VectorXd& w1,
                       const Eigen::VectorXd& w2)> d2;

  Eigen::MatrixXd matrix(const Eigen::VectorXd& p) const;
};

struct ThreeFormEval {
  int dim = 0;
  std::function<double(const Eigen::VectorXd& p, const Eigen::VectorXd& u,
                       const Eigen::VectorXd& v, const Eigen::VectorXd& w)> val;
  std::function<double(const Eigen::VectorXd& p, const Eigen::VectorXd& u,
                       const Eigen::VectorXd& v, const Eigen::VectorXd& w,
                       const Eigen::VectorXd& z)> d1;
};

// ---------------------------------------------------------------------------
// expression-backed tensor fields

struct ScalarField {
  Chart chart;
  Expr f;

  double value(const Eigen::VectorXd& p) const;
  Jetd value_jet(const JVecd& p) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& p) const;
};

struct VectorField {
  Chart chart;
  std::vector<Expr> comps;  // coefficient of each coordinate derivation

  static VectorField euler(const Chart& chart);  // position field, zero at origin

  Eigen::VectorXd value(const Eigen::VectorXd& p) const;
  JVecd value_jet(const JVecd& p) const;
  SmoothMap as_map() const;
};

struct OneForm {
  Chart chart;
  std::vector<Expr> comps;  // coefficient of each coordinate differential

  Eigen::VectorXd components(const Eigen::VectorXd& p) const;
  Jetd apply(const JVecd& p, const JVecd& u) const;
  OneFormEval evaluator() const;
};

struct TwoForm {
  Chart chart;
  std::vector<Expr> packed;  // entries i<j in pair_index order

  static TwoForm zero(const Chart& chart);
  void set(int i, int j, const Expr& e);  // i != j; stores with sign
  Expr entry(int i, int j) const;         // signed component

  Eigen::MatrixXd matrix(const Eigen::VectorXd& p) const;
  Jetd apply(const JVecd& p, const JVecd& u, const JVecd& v) const;
  TwoFormEval evaluator() const;
};

struct ThreeForm {
  Chart chart;
  std::vector<Expr> packed;  // entries i<j<k in triple_index order

  static ThreeForm zero(const Chart& chart);
  void set(int i, int j, int k, const Expr& e);  // distinct indices; signed store
  Expr entry(int i, int j, int k) const;

  Jetd apply(const JVecd& p, const JVecd& u, const JVecd& v, const JVecd& w) const;
  ThreeFormEval evaluator() const;
};

struct Bivector {
  Chart chart;
  std::vector<Expr> packed;  // entries i<j in pair_index order

  static Bivector zero(const Chart& chart);
  void set(int i, int j, const Expr& e);
  Expr entry(int i, int j) const;

  /// Matrix of pairings against coordinate differentials, row = first slot.
  Eigen::MatrixXd matrix(const Eigen::VectorXd& p) const;
  JMatd matrix_jet(const JVecd& p) const;
  /// mu |-> pi(mu, .) contracted in the first slot.
  Eigen::VectorXd sharp(const Eigen::VectorXd& p, const Eigen::VectorXd& mu) const;
  JVecd sharp_jet(const JVecd& p, const JVecd& mu) const;
};

/// Trivector components of the Jacobi obstruction of a bivector field.
struct Trivector {
  Chart chart;
  std::vector<Expr> packed;  // entries i<j<k

  Expr entry(int i, int j, int k) const;
  double component(const Eigen::VectorXd& p, int i, int j, int k) const;
  double max_abs(const Eigen::VectorXd& p) const;
};

// ---------------------------------------------------------------------------
// symbolic operations (exact, expression in / expression out)

TwoForm exterior_derivative(const OneForm& a);
ThreeForm exterior_derivative(const TwoForm& w);

OneForm interior_product(const VectorField& X, const TwoForm& w);
TwoForm interior_product(const VectorField& X, const ThreeForm& h);

VectorField lie_bracket(const VectorField& X, const VectorField& Y);

TwoForm add(const TwoForm& a, const TwoForm& b);
ThreeForm add(const ThreeForm& a, const ThreeForm& b);

/// Jacobi obstruction J^{ijk} = sum_l pi^{li} d_l pi^{jk} + cyclic(i,j,k);
/// identically zero exactly for Poisson bivectors.
Trivector jacobiator(const Bivector& pi);

/// Pullback along the substitution map xi -> comps(xi) given by expressions.
ScalarField pullback_expr(const std::vector<Expr>& map, const Chart& domain, const ScalarField& f);
OneForm pullback_expr(const std::vector<Expr>& map, const Chart& domain, const OneForm& a);
TwoForm pullback_expr(const std::vector<Expr>& map, const Chart& domain, const TwoForm& w);
ThreeForm pullback_expr(const std::vector<Expr>& map, const Chart& domain, const ThreeForm& h);

// ---------------------------------------------------------------------------
// affine coordinate changes (old = A * new + b)

struct AffineChange {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;

  std::vector<Expr> forward_exprs() const;  // old coordinates as expressions in new
};

ScalarField change_coordinates(const AffineChange& c, const Chart& new_chart, const ScalarField& f);
VectorField change_coordinates(const AffineChange& c, const Chart& new_chart, const VectorField& X);
OneForm change_coordinates(const AffineChange& c, const Chart& new_chart, const OneForm& a);
TwoForm change_coordinates(const AffineChange& c, const Chart& new_chart, const TwoForm& w);
ThreeForm change_coordinates(const AffineChange& c, const Chart& new_chart, const ThreeForm& h);
Bivector change_coordinates(const AffineChange& c, const Chart& new_chart, const Bivector& pi);

// ---------------------------------------------------------------------------
// evaluator-level operations (order-decaying)

TwoFormEval exterior_derivative(const OneFormEval& a);
ThreeFormEval exterior_derivative(const TwoFormEval& w);

OneFormEval interior_product(const SmoothMap& X, const TwoFormEval& w);
TwoFormEval interior_product(const SmoothMap& X, const ThreeFormEval& h);

OneFormEval pullback(const SmoothMap& phi, const OneFormEval& a);
TwoFormEval pullback(const SmoothMap& phi, const TwoFormEval& w);
ThreeFormEval pullback(const SmoothMap& phi, const ThreeFormEval& h);

TwoFormEval add(const TwoFormEval& a, const TwoFormEval& b);
TwoFormEval scale(double c, const TwoFormEval& a);

}  // namespace splitform
