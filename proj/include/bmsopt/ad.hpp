#pragma once

// Forward-mode automatic differentiation with a fixed number of tangent
// directions. Nesting Dual<Dual<double, N>, N> yields exact second
// derivatives (the outer tangent of the inner tangent).

#include <array>
#include <cmath>
#include <type_traits>

namespace bmsopt {

template <typename T, int N>
struct Dual {
  T val{};
  std::array<T, N> d{};

  constexpr Dual() = default;
  constexpr Dual(double v) : val(v) {}  // NOLINT: implicit from constants
  constexpr Dual(const T& v, const std::array<T, N>& g) : val(v), d(g) {}

  template <typename U = T, std::enable_if_t<!std::is_same_v<U, double>, int> = 0>
  constexpr Dual(const T& v) : val(v) {}  // NOLINT

  static Dual variable(const T& v, int index) {
    Dual r(v);
    r.d[index] = T(1.0);
    return r;
  }

  Dual& operator+=(const Dual& o) {
    val += o.val;
    for (int i = 0; i < N; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    val -= o.val;
    for (int i = 0; i < N; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (int i = 0; i < N; ++i) d[i] = d[i] * o.val + val * o.d[i];
    val *= o.val;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const T inv = T(1.0) / o.val;
    val *= inv;
    for (int i = 0; i < N; ++i) d[i] = (d[i] - val * o.d[i]) * inv;
    return *this;
  }
  Dual& operator*=(double s) {
    val *= s;
    for (auto& x : d) x *= s;
    return *this;
  }
};

template <typename>
struct is_dual : std::false_type {};
template <typename T, int N>
struct is_dual<Dual<T, N>> : std::true_type {};

/// Plain value of a (possibly nested) dual number.
inline double value_of(double x) { return x; }
template <typename T, int N>
double value_of(const Dual<T, N>& x) {
  return value_of(x.val);
}

template <typename T, int N>
Dual<T, N> operator-(const Dual<T, N>& a) {
  Dual<T, N> r;
  r.val = -a.val;
  for (int i = 0; i < N; ++i) r.d[i] = -a.d[i];
  return r;
}

template <typename T, int N>
Dual<T, N> operator+(Dual<T, N> a, const Dual<T, N>& b) {
  return a += b;
}
template <typename T, int N>
Dual<T, N> operator-(Dual<T, N> a, const Dual<T, N>& b) {
  return a -= b;
}
template <typename T, int N>
Dual<T, N> operator*(Dual<T, N> a, const Dual<T, N>& b) {
  return a *= b;
}
template <typename T, int N>
Dual<T, N> operator/(Dual<T, N> a, const Dual<T, N>& b) {
  return a /= b;
}

template <typename T, int N>
Dual<T, N> operator+(Dual<T, N> a, double b) {
  a.val += b;
  return a;
}
template <typename T, int N>
Dual<T, N> operator+(double b, Dual<T, N> a) {
  a.val += b;
  return a;
}
template <typename T, int N>
Dual<T, N> operator-(Dual<T, N> a, double b) {
  a.val -= b;
  return a;
}
template <typename T, int N>
Dual<T, N> operator-(double b, const Dual<T, N>& a) {
  Dual<T, N> r = -a;
  r.val += b;
  return r;
}
template <typename T, int N>
Dual<T, N> operator*(Dual<T, N> a, double b) {
  return a *= b;
}
template <typename T, int N>
Dual<T, N> operator*(double b, Dual<T, N> a) {
  return a *= b;
}
template <typename T, int N>
Dual<T, N> operator/(Dual<T, N> a, double b) {
  return a *= (1.0 / b);
}
template <typename T, int N>
Dual<T, N> operator/(double b, const Dual<T, N>& a) {
  return Dual<T, N>(T(b)) / a;
}

template <typename T, int N>
bool operator<(const Dual<T, N>& a, const Dual<T, N>& b) {
  return value_of(a) < value_of(b);
}
template <typename T, int N>
bool operator>(const Dual<T, N>& a, const Dual<T, N>& b) {
  return value_of(a) > value_of(b);
}
template <typename T, int N>
bool operator<(const Dual<T, N>& a, double b) {
  return value_of(a) < b;
}
template <typename T, int N>
bool operator>(const Dual<T, N>& a, double b) {
  return value_of(a) > b;
}
template <typename T, int N>
bool operator<=(const Dual<T, N>& a, double b) {
  return value_of(a) <= b;
}
template <typename T, int N>
bool operator>=(const Dual<T, N>& a, double b) {
  return value_of(a) >= b;
}

namespace detail {
// Chain rule: f(a) with f'(a) = df.
template <typename T, int N>
Dual<T, N> chain(const Dual<T, N>& a, const T& f, const T& df) {
  Dual<T, N> r;
  r.val = f;
  for (int i = 0; i < N; ++i) r.d[i] = df * a.d[i];
  return r;
}
}  // namespace detail

template <typename T, int N>
Dual<T, N> exp(const Dual<T, N>& a) {
  using std::exp;
  const T e = exp(a.val);
  return detail::chain(a, e, e);
}
template <typename T, int N>
Dual<T, N> log(const Dual<T, N>& a) {
  using std::log;
  return detail::chain(a, log(a.val), T(1.0) / a.val);
}
template <typename T, int N>
Dual<T, N> sqrt(const Dual<T, N>& a) {
  using std::sqrt;
  const T s = sqrt(a.val);
  return detail::chain(a, s, T(0.5) / s);
}
template <typename T, int N>
Dual<T, N> asinh(const Dual<T, N>& a) {
  using std::asinh;
  using std::sqrt;
  return detail::chain(a, asinh(a.val), T(1.0) / sqrt(T(1.0) + a.val * a.val));
}
template <typename T, int N>
Dual<T, N> pow(const Dual<T, N>& a, double p) {
  using std::pow;
  return detail::chain(a, pow(a.val, p), T(p) * pow(a.val, p - 1.0));
}

}  // namespace bmsopt
