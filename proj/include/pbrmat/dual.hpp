#pragma once

#include <array>
#include <cmath>

namespace pbrmat {

// Forward-mode dual scalar: value plus N partial derivatives carried through
// every arithmetic op. Plain doubles lift to constants (zero partials), so a
// function templated over its scalar type yields values and exact derivatives
// from one piece of code.
template <int N>
struct Dual {
  double v = 0.0;
  std::array<double, N> d{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit lift of constants

  static Dual seed(double value, int lane) {
    Dual x(value);
    x.d[lane] = 1.0;
    return x;
  }
};

template <int N>
inline double value_of(const Dual<N>& x) {
  return x.v;
}
inline double value_of(double x) { return x; }

template <int N>
inline Dual<N> operator+(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r(a.v + b.v);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] + b.d[i];
  return r;
}
template <int N>
inline Dual<N> operator+(const Dual<N>& a, double b) {
  Dual<N> r = a;
  r.v += b;
  return r;
}
template <int N>
inline Dual<N> operator+(double a, const Dual<N>& b) {
  return b + a;
}

template <int N>
inline Dual<N> operator-(const Dual<N>& a) {
  Dual<N> r(-a.v);
  for (int i = 0; i < N; ++i) r.d[i] = -a.d[i];
  return r;
}
template <int N>
inline Dual<N> operator-(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r(a.v - b.v);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] - b.d[i];
  return r;
}
template <int N>
inline Dual<N> operator-(const Dual<N>& a, double b) {
  Dual<N> r = a;
  r.v -= b;
  return r;
}
template <int N>
inline Dual<N> operator-(double a, const Dual<N>& b) {
  Dual<N> r(a - b.v);
  for (int i = 0; i < N; ++i) r.d[i] = -b.d[i];
  return r;
}

template <int N>
inline Dual<N> operator*(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r(a.v * b.v);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}
template <int N>
inline Dual<N> operator*(const Dual<N>& a, double b) {
  Dual<N> r(a.v * b);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * b;
  return r;
}
template <int N>
inline Dual<N> operator*(double a, const Dual<N>& b) {
  return b * a;
}

template <int N>
inline Dual<N> operator/(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r(a.v / b.v);
  for (int i = 0; i < N; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) / b.v;
  return r;
}
template <int N>
inline Dual<N> operator/(const Dual<N>& a, double b) {
  Dual<N> r(a.v / b);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] / b;
  return r;
}
template <int N>
inline Dual<N> operator/(double a, const Dual<N>& b) {
  Dual<N> r(a / b.v);
  double s = -r.v / b.v;
  for (int i = 0; i < N; ++i) r.d[i] = s * b.d[i];
  return r;
}

template <int N>
inline Dual<N> sqrt(const Dual<N>& a) {
  Dual<N> r(std::sqrt(a.v));
  double s = 0.5 / r.v;
  for (int i = 0; i < N; ++i) r.d[i] = s * a.d[i];
  return r;
}

template <int N>
inline Dual<N> exp(const Dual<N>& a) {
  Dual<N> r(std::exp(a.v));
  for (int i = 0; i < N; ++i) r.d[i] = r.v * a.d[i];
  return r;
}

// max(a, floor) with derivative 0 on the clamped branch (and at the kink).
template <int N>
inline Dual<N> clamp_min(const Dual<N>& a, double floor) {
  return a.v > floor ? a : Dual<N>(floor);
}
inline double clamp_min(double a, double floor) { return a > floor ? a : floor; }

// max(0, a) with derivative 0 at and below the kink.
template <int N>
inline Dual<N> relu(const Dual<N>& a) {
  return a.v > 0.0 ? a : Dual<N>(0.0);
}
inline double relu(double a) { return a > 0.0 ? a : 0.0; }

}  // namespace pbrmat
