#pragma once

#include <cmath>

namespace llab {

// Forward-mode dual number. Pushing duals through a forward+backward pass
// yields exact Hessian-vector products (gradient tangents), with no
// finite-difference truncation error.
template <typename T>
struct Dual {
  T v{};  // value
  T d{};  // tangent

  Dual() = default;
  Dual(T value) : v(value), d(T(0)) {}  // NOLINT: implicit for scalar mixing
  Dual(T value, T tangent) : v(value), d(tangent) {}

  Dual& operator+=(const Dual& o) {
    v += o.v;
    d += o.d;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    d -= o.d;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    d = d * o.v + v * o.d;
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    d = (d * o.v - v * o.d) / (o.v * o.v);
    v /= o.v;
    return *this;
  }
};

template <typename T>
Dual<T> operator+(Dual<T> a, const Dual<T>& b) { return a += b; }
template <typename T>
Dual<T> operator-(Dual<T> a, const Dual<T>& b) { return a -= b; }
template <typename T>
Dual<T> operator*(Dual<T> a, const Dual<T>& b) { return a *= b; }
template <typename T>
Dual<T> operator/(Dual<T> a, const Dual<T>& b) { return a /= b; }
template <typename T>
Dual<T> operator-(const Dual<T>& a) { return {-a.v, -a.d}; }

template <typename T>
bool operator<(const Dual<T>& a, const Dual<T>& b) { return a.v < b.v; }
template <typename T>
bool operator>(const Dual<T>& a, const Dual<T>& b) { return a.v > b.v; }
template <typename T>
bool operator<=(const Dual<T>& a, const Dual<T>& b) { return a.v <= b.v; }
template <typename T>
bool operator>=(const Dual<T>& a, const Dual<T>& b) { return a.v >= b.v; }

template <typename T>
Dual<T> exp(const Dual<T>& a) {
  const T e = std::exp(a.v);
  return {e, a.d * e};
}
template <typename T>
Dual<T> log(const Dual<T>& a) { return {std::log(a.v), a.d / a.v}; }

using std::exp;
using std::log;

template <typename T>
bool is_finite(T x) { return std::isfinite(x); }
template <typename T>
bool is_finite(const Dual<T>& x) { return std::isfinite(x.v) && std::isfinite(x.d); }

// Value part of a (possibly dual) scalar.
template <typename T>
T value_of(T x) { return x; }
template <typename T>
T value_of(const Dual<T>& x) { return x.v; }

}  // namespace llab
