#pragma once

#include <complex>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "splitform/errors.hpp"
#include "splitform/jet.hpp"

namespace splitform {

enum class ExprOp {
  kConst,
  kVar,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kPow,
  kExp,
  kLog,
  kSin,
  kCos,
  kSqrt
};

struct ExprNode;

/// Immutable expression handle over chart variables x1..xn.
///
/// Trees are shared, never mutated after construction, and safe to evaluate
/// concurrently. Build either by parsing or through the operator overloads
/// below (used heavily by the graph/frame constructors).
class Expr {
 public:
  Expr() = default;
  explicit Expr(std::shared_ptr<const ExprNode> n) : node_(std::move(n)) {}

  bool valid() const { return node_ != nullptr; }
  const ExprNode& node() const { return *node_; }

  static Expr constant(double c);
  static Expr constant(std::complex<double> c);
  static Expr variable(int index);  ///< 0-based chart variable

 private:
  std::shared_ptr<const ExprNode> node_;
};

struct ExprNode {
  ExprOp op;
  std::complex<double> cval{0.0, 0.0};
  int var = -1;
  int ipow = 0;
  Expr a;
  Expr b;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr pow(const Expr& a, int k);
Expr exp(const Expr& a);
Expr log(const Expr& a);
Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr sqrt(const Expr& a);

/// Parses an expression over variables x1..xn_vars. The identifier `i` is the
/// imaginary unit. Throws ParseError with a 1-based line/column on bad input.
Expr parse_expr(std::string_view text, int n_vars);

/// Structural derivative d(e)/d(x_{var+1}); no simplification is attempted.
Expr derivative(const Expr& e, int var);

/// Replaces every variable x_{i+1} by repl[i]; repl.size() must cover every
/// variable occurring in e.
Expr substitute(const Expr& e, const std::vector<Expr>& repl);

/// Folds constant subtrees and drops additive/multiplicative identities.
/// Generated expressions (adjugate solves, contractions) shrink by orders of
/// magnitude, which matters for flow right-hand sides.
Expr simplify(const Expr& e);

namespace detail {

template <class S>
S lift_constant(const std::complex<double>& c) {
  if constexpr (std::is_same_v<S, double>) {
    if (c.imag() != 0.0) throw DomainError("complex constant in real mode");
    return c.real();
  } else if constexpr (std::is_same_v<S, std::complex<double>>) {
    return c;
  } else {
    using Inner = typename S::value_type;  // S is a Jet
    return S(lift_constant<Inner>(c));
  }
}

} // namespace detail

/// Evaluates an expression over any supported scalar (double, complex, or a
/// second-order jet of either). Division, log, sqrt and negative powers are
/// guarded; guard violations throw DomainError.
template <class S>
S eval(const Expr& e, const S* vars, int n_vars) {
  if (!e.valid()) throw Error("evaluating an empty expression");
  const ExprNode& n = e.node();
  switch (n.op) {
    case ExprOp::kConst:
      return detail::lift_constant<S>(n.cval);
    case ExprOp::kVar:
      if (n.var < 0 || n.var >= n_vars) throw Error("variable index out of range at evaluation");
      return vars[n.var];
    case ExprOp::kAdd:
      return eval<S>(n.a, vars, n_vars) + eval<S>(n.b, vars, n_vars);
    case ExprOp::kSub:
      return eval<S>(n.a, vars, n_vars) - eval<S>(n.b, vars, n_vars);
    case ExprOp::kMul:
      return eval<S>(n.a, vars, n_vars) * eval<S>(n.b, vars, n_vars);
    case ExprOp::kDiv: {
      const S num = eval<S>(n.a, vars, n_vars);
      const S den = eval<S>(n.b, vars, n_vars);
      if (detail::abs_value(den) < 1e-300) throw DomainError("division by zero");
      return num / den;
    }
    case ExprOp::kNeg:
      return -eval<S>(n.a, vars, n_vars);
    case ExprOp::kPow: {
      const S base = eval<S>(n.a, vars, n_vars);
      if constexpr (std::is_same_v<S, double> || std::is_same_v<S, std::complex<double>>) {
        using std::pow;
        if (n.ipow < 0 && detail::abs_value(base) < 1e-300)
          throw DomainError("zero raised to a negative power");
        return pow(base, S(n.ipow));
      } else {
        return jet_ipow(base, n.ipow);
      }
    }
    case ExprOp::kExp: {
      using std::exp;
      return exp(eval<S>(n.a, vars, n_vars));
    }
    case ExprOp::kLog: {
      using std::log;
      const S x = eval<S>(n.a, vars, n_vars);
      if constexpr (std::is_same_v<S, double>) {
        if (x <= 0.0) throw DomainError("log of non-positive value");
      } else if constexpr (std::is_same_v<S, std::complex<double>>) {
        if (detail::abs_value(x) == 0.0) throw DomainError("log of zero");
      }
      return log(x);
    }
    case ExprOp::kSin: {
      using std::sin;
      return sin(eval<S>(n.a, vars, n_vars));
    }
    case ExprOp::kCos: {
      using std::cos;
      return cos(eval<S>(n.a, vars, n_vars));
    }
    case ExprOp::kSqrt: {
      using std::sqrt;
      const S x = eval<S>(n.a, vars, n_vars);
      if constexpr (std::is_same_v<S, double>) {
        if (x < 0.0) throw DomainError("sqrt of negative value");
      }
      return sqrt(x);
    }
  }
  throw Error("corrupt expression node");
}

template <class S>
S eval(const Expr& e, const Eigen::Matrix<S, Eigen::Dynamic, 1>& vars) {
  return eval<S>(e, vars.data(), static_cast<int>(vars.size()));
}

/// Value plus directional first/second derivatives along k seeded directions.
template <class S>
struct JetValue {
  S value{};
  Eigen::Matrix<S, Eigen::Dynamic, 1> grad;   ///< length k
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> hess;  ///< k x k, exactly symmetric
};

namespace detail {

template <class S>
JetValue<S> eval_jet_impl(const Expr& e, const Eigen::VectorXd& point,
                          const std::vector<Eigen::VectorXd>& dirs) {
  const int k = static_cast<int>(dirs.size());
  if (k > Jet<S>::kMaxDirs) throw Error("at most 3 jet directions are supported");
  const int n = static_cast<int>(point.size());
  std::vector<Jet<S>> vars(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    vars[static_cast<size_t>(i)].v = S(point[i]);
    for (int d = 0; d < k; ++d) {
      if (dirs[static_cast<size_t>(d)].size() != n) throw Error("jet direction has wrong dimension");
      vars[static_cast<size_t>(i)].g[d] = S(dirs[static_cast<size_t>(d)][i]);
    }
  }
  const Jet<S> r = eval<Jet<S>>(e, vars.data(), n);
  JetValue<S> out;
  out.value = r.v;
  out.grad.resize(k);
  out.hess.resize(k, k);
  for (int d = 0; d < k; ++d) out.grad[d] = r.g[d];
  for (int q = 0; q < k; ++q)
    for (int p = 0; p < k; ++p) out.hess(p, q) = r.hess(p, q);
  return out;
}

} // namespace detail

/// Second-order jet of e at a real point along up to three directions.
inline JetValue<double> eval_jet(const Expr& e, const Eigen::VectorXd& point,
                                 const std::vector<Eigen::VectorXd>& dirs) {
  return detail::eval_jet_impl<double>(e, point, dirs);
}

/// Same, but evaluated through complex arithmetic (constants may be complex).
inline JetValue<std::complex<double>> eval_jet_complex(const Expr& e, const Eigen::VectorXd& point,
                                                       const std::vector<Eigen::VectorXd>& dirs) {
  return detail::eval_jet_impl<std::complex<double>>(e, point, dirs);
}

} // namespace splitform
