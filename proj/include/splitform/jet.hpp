#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "splitform/errors.hpp"

namespace splitform {

/// Truncated second-order jet along up to kMaxDirs seeded directions.
///
/// Carries a value, the directional first derivatives g[a] along each seeded
/// direction, and the symmetric matrix of directional second derivatives
/// stored as a packed upper triangle h[idx(a,b)], a <= b. Arithmetic
/// propagates both orders exactly (chain rule, no finite differences).
/// Unseeded slots stay zero, so it is safe to run all slots unconditionally.
template <class S>
struct Jet {
  using value_type = S;
  static constexpr int kMaxDirs = 3;
  static constexpr int kPacked = 6;

  S v{};
  Eigen::Matrix<S, kMaxDirs, 1> g = Eigen::Matrix<S, kMaxDirs, 1>::Zero();
  Eigen::Matrix<S, kPacked, 1> h = Eigen::Matrix<S, kPacked, 1>::Zero();

  Jet() = default;
  Jet(const S& value) : v(value) {}  // NOLINT: implicit by design, constants lift silently

  /// Packed index of the (a,b) second-derivative entry, a <= b.
  static constexpr int idx(int a, int b) { return b * (b + 1) / 2 + a; }

  /// Symmetric accessor.
  S hess(int a, int b) const { return a <= b ? h[idx(a, b)] : h[idx(b, a)]; }

  Jet operator-() const {
    Jet r;
    r.v = -v;
    r.g = -g;
    r.h = -h;
    return r;
  }

  template <class T> Jet& operator+=(const T& o) { *this = *this + o; return *this; }
  template <class T> Jet& operator-=(const T& o) { *this = *this - o; return *this; }
  template <class T> Jet& operator*=(const T& o) { *this = *this * o; return *this; }
  template <class T> Jet& operator/=(const T& o) { *this = *this / o; return *this; }
};

template <class S>
Jet<S> operator+(const Jet<S>& a, const Jet<S>& b) {
  Jet<S> r;
  r.v = a.v + b.v;
  r.g = a.g + b.g;
  r.h = a.h + b.h;
  return r;
}

template <class S>
Jet<S> operator-(const Jet<S>& a, const Jet<S>& b) {
  Jet<S> r;
  r.v = a.v - b.v;
  r.g = a.g - b.g;
  r.h = a.h - b.h;
  return r;
}

template <class S>
Jet<S> operator*(const Jet<S>& a, const Jet<S>& b) {
  Jet<S> r;
  r.v = a.v * b.v;
  r.g = a.g * b.v + b.g * a.v;
  for (int q = 0; q < Jet<S>::kMaxDirs; ++q)
    for (int p = 0; p <= q; ++p) {
      const int k = Jet<S>::idx(p, q);
      r.h[k] = a.h[k] * b.v + a.v * b.h[k] + a.g[p] * b.g[q] + a.g[q] * b.g[p];
    }
  return r;
}

template <class S>
Jet<S> operator/(const Jet<S>& a, const Jet<S>& b) {
  Jet<S> r;
  r.v = a.v / b.v;
  r.g = (a.g - b.g * r.v) / b.v;
  for (int q = 0; q < Jet<S>::kMaxDirs; ++q)
    for (int p = 0; p <= q; ++p) {
      const int k = Jet<S>::idx(p, q);
      r.h[k] = (a.h[k] - r.v * b.h[k] - r.g[p] * b.g[q] - r.g[q] * b.g[p]) / b.v;
    }
  return r;
}

// Mixed scalar forms keep field evaluation code readable.
template <class S> Jet<S> operator+(const S& c, const Jet<S>& a) { return Jet<S>(c) + a; }
template <class S> Jet<S> operator+(const Jet<S>& a, const S& c) { return a + Jet<S>(c); }
template <class S> Jet<S> operator-(const S& c, const Jet<S>& a) { return Jet<S>(c) - a; }
template <class S> Jet<S> operator-(const Jet<S>& a, const S& c) { return a - Jet<S>(c); }

template <class S>
Jet<S> operator*(const S& c, const Jet<S>& a) {
  Jet<S> r;
  r.v = c * a.v;
  r.g = c * a.g;
  r.h = c * a.h;
  return r;
}
template <class S> Jet<S> operator*(const Jet<S>& a, const S& c) { return c * a; }
template <class S> Jet<S> operator/(const Jet<S>& a, const S& c) { return a * (S(1) / c); }

inline Jet<std::complex<double>> operator*(double c, const Jet<std::complex<double>>& a) {
  return std::complex<double>(c) * a;
}
inline Jet<std::complex<double>> operator*(const Jet<std::complex<double>>& a, double c) {
  return std::complex<double>(c) * a;
}

/// Composes a scalar function through the jet: given f(x.v), f'(x.v), f''(x.v)
/// returns the jet of f applied to x.
template <class S>
Jet<S> jet_compose(const S& f0, const S& f1, const S& f2, const Jet<S>& x) {
  Jet<S> r;
  r.v = f0;
  r.g = f1 * x.g;
  for (int q = 0; q < Jet<S>::kMaxDirs; ++q)
    for (int p = 0; p <= q; ++p) {
      const int k = Jet<S>::idx(p, q);
      r.h[k] = f1 * x.h[k] + f2 * x.g[p] * x.g[q];
    }
  return r;
}

namespace detail {
inline double abs_value(double x) { return std::abs(x); }
inline double abs_value(const std::complex<double>& x) { return std::abs(x); }
template <class S> double abs_value(const Jet<S>& x) { return abs_value(x.v); }

template <class T> struct scalar_traits {
  using value_type = T;
  static T value(const T& x) { return x; }
};
template <class S> struct scalar_traits<Jet<S>> {
  using value_type = S;
  static S value(const Jet<S>& x) { return x.v; }
};

inline double conj_value(double x) { return x; }
inline std::complex<double> conj_value(const std::complex<double>& x) { return std::conj(x); }
} // namespace detail

/// Componentwise conjugate; Eigen's complex-valued products rely on this.
template <class S>
Jet<S> conj(const Jet<S>& x) {
  Jet<S> r;
  r.v = detail::conj_value(x.v);
  for (int d = 0; d < Jet<S>::kMaxDirs; ++d) r.g[d] = detail::conj_value(x.g[d]);
  for (int k = 0; k < Jet<S>::kPacked; ++k) r.h[k] = detail::conj_value(x.h[k]);
  return r;
}

template <class S>
Jet<S> real(const Jet<S>& x) {
  Jet<S> r;
  r.v = S(std::real(x.v));
  for (int d = 0; d < Jet<S>::kMaxDirs; ++d) r.g[d] = S(std::real(x.g[d]));
  for (int k = 0; k < Jet<S>::kPacked; ++k) r.h[k] = S(std::real(x.h[k]));
  return r;
}

template <class S>
Jet<S> imag(const Jet<S>& x) {
  Jet<S> r;
  r.v = S(std::imag(x.v));
  for (int d = 0; d < Jet<S>::kMaxDirs; ++d) r.g[d] = S(std::imag(x.g[d]));
  for (int k = 0; k < Jet<S>::kPacked; ++k) r.h[k] = S(std::imag(x.h[k]));
  return r;
}

template <class S>
Jet<S> abs2(const Jet<S>& x) {
  return conj(x) * x;
}

template <class S>
Jet<S> exp(const Jet<S>& x) {
  using std::exp;
  const S e = exp(x.v);
  return jet_compose(e, e, e, x);
}

template <class S>
Jet<S> log(const Jet<S>& x) {
  using std::log;
  if (detail::abs_value(x.v) == 0.0) throw DomainError("log of zero");
  if constexpr (std::is_same_v<S, double>) {
    if (x.v <= 0.0) throw DomainError("log of non-positive value");
  }
  const S inv = S(1) / x.v;
  return jet_compose(log(x.v), inv, -inv * inv, x);
}

template <class S>
Jet<S> sin(const Jet<S>& x) {
  using std::cos;
  using std::sin;
  const S s = sin(x.v), c = cos(x.v);
  return jet_compose(s, c, -s, x);
}

template <class S>
Jet<S> cos(const Jet<S>& x) {
  using std::cos;
  using std::sin;
  const S s = sin(x.v), c = cos(x.v);
  return jet_compose(c, -s, -c, x);
}

template <class S>
Jet<S> sqrt(const Jet<S>& x) {
  using std::sqrt;
  if constexpr (std::is_same_v<S, double>) {
    if (x.v < 0.0) throw DomainError("sqrt of negative value");
  }
  if (detail::abs_value(x.v) == 0.0) {
    const bool seeded = x.g.squaredNorm() != 0.0 || x.h.squaredNorm() != 0.0;
    if (seeded) throw DomainError("sqrt derivative at zero");
    return Jet<S>(S(0));
  }
  const S r = sqrt(x.v);
  const S d1 = S(0.5) / r;
  const S d2 = S(-0.25) / (r * x.v);
  return jet_compose(r, d1, d2, x);
}

/// Integer power with the usual guards at zero.
template <class S>
Jet<S> jet_ipow(const Jet<S>& x, int n) {
  using std::pow;
  if (n == 0) return Jet<S>(S(1));
  if (n < 0 && detail::abs_value(x.v) == 0.0) throw DomainError("zero raised to a negative power");
  const S f0 = pow(x.v, S(n));
  S f1, f2;
  if (detail::abs_value(x.v) == 0.0) {
    // n >= 1 here; derivatives at zero are 0 except the linear / quadratic edge
    f1 = (n == 1) ? S(1) : S(0);
    f2 = (n == 2) ? S(2) : S(0);
  } else {
    f1 = S(n) * pow(x.v, S(n - 1));
    f2 = S(n) * S(n - 1) * (n == 1 ? S(0) : pow(x.v, S(n - 2)));
  }
  return jet_compose(f0, f1, f2, x);
}

using Jetd = Jet<double>;
using Jetc = Jet<std::complex<double>>;

} // namespace splitform

// Eigen scalar integration; must precede any instantiation of Matrix<Jet>.
namespace Eigen {

template <class S>
struct NumTraits<splitform::Jet<S>> : GenericNumTraits<splitform::Jet<S>> {
  typedef splitform::Jet<S> Real;
  typedef splitform::Jet<S> NonInteger;
  typedef splitform::Jet<S> Nested;
  typedef S Literal;
  enum {
    IsComplex = NumTraits<S>::IsComplex,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 10,
    AddCost = 30,
    MulCost = 60
  };
  static inline Real epsilon() { return splitform::Jet<S>(NumTraits<S>::epsilon()); }
  static inline Real dummy_precision() { return splitform::Jet<S>(NumTraits<S>::dummy_precision()); }
};

template <class S, class BinOp>
struct ScalarBinaryOpTraits<splitform::Jet<S>, S, BinOp> {
  typedef splitform::Jet<S> ReturnType;
};
template <class S, class BinOp>
struct ScalarBinaryOpTraits<S, splitform::Jet<S>, BinOp> {
  typedef splitform::Jet<S> ReturnType;
};
template <class BinOp>
struct ScalarBinaryOpTraits<splitform::Jet<std::complex<double>>, double, BinOp> {
  typedef splitform::Jet<std::complex<double>> ReturnType;
};
template <class BinOp>
struct ScalarBinaryOpTraits<double, splitform::Jet<std::complex<double>>, BinOp> {
  typedef splitform::Jet<std::complex<double>> ReturnType;
};

} // namespace Eigen

namespace splitform {

template <class S> using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S> using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
using JVecd = Vec<Jetd>;
using JVecc = Vec<Jetc>;
using JMatd = Mat<Jetd>;
using JMatc = Mat<Jetc>;

/// Wraps a point into jets carrying up to three seeded first-order directions.
inline JVecd make_jets(const Eigen::VectorXd& p,
                       const std::vector<Eigen::VectorXd>& dirs = {}) {
  if (dirs.size() > static_cast<std::size_t>(Jetd::kMaxDirs))
    throw Error("make_jets: at most 3 seed directions are supported");
  JVecd out(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    out[i] = Jetd(p[i]);
    for (std::size_t d = 0; d < dirs.size(); ++d) {
      if (dirs[d].size() != p.size())
        throw Error("make_jets: direction dimension mismatch");
      out[i].g[static_cast<int>(d)] = dirs[d][static_cast<Eigen::Index>(i)];
    }
  }
  return out;
}

template <class S>
Vec<S> jet_values(const Vec<Jet<S>>& v) {
  Vec<S> out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = v[i].v;
  return out;
}

/// m x k matrix of first derivatives along the first k seeded directions.
template <class S>
Mat<S> jet_firsts(const Vec<Jet<S>>& v, int k) {
  Mat<S> out(v.size(), k);
  for (Eigen::Index i = 0; i < v.size(); ++i)
    for (int d = 0; d < k; ++d) out(i, d) = v[i].g[d];
  return out;
}

template <class S>
Vec<S> jet_first(const Vec<Jet<S>>& v, int d) {
  Vec<S> out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = v[i].g[d];
  return out;
}

/// Second derivative contracted with seed directions a and b.
template <class S>
Vec<S> jet_second(const Vec<Jet<S>>& v, int a, int b) {
  Vec<S> out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = v[i].hess(a, b);
  return out;
}

inline Jetc complexify(const Jetd& x) {
  Jetc out;
  out.v = std::complex<double>(x.v, 0.0);
  for (int d = 0; d < Jetd::kMaxDirs; ++d) out.g[d] = std::complex<double>(x.g[d], 0.0);
  for (int k = 0; k < Jetd::kPacked; ++k) out.h[k] = std::complex<double>(x.h[k], 0.0);
  return out;
}

inline JVecc complexify(const JVecd& v) {
  JVecc out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = complexify(v[i]);
  return out;
}

} // namespace splitform
