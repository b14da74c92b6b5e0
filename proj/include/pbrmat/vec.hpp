#pragma once

#include <cmath>

namespace pbrmat {

template <typename T>
struct Vec3 {
  T x{}, y{}, z{};
};

using Vec3d = Vec3<double>;

template <typename T, typename U>
inline auto dot(const Vec3<T>& a, const Vec3<U>& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <typename T>
inline Vec3<T> operator+(const Vec3<T>& a, const Vec3<T>& b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z};
}

template <typename T>
inline Vec3<T> operator-(const Vec3<T>& a, const Vec3<T>& b) {
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}

template <typename T, typename U>
inline auto operator*(const Vec3<T>& a, U s) -> Vec3<decltype(a.x * s)> {
  return {a.x * s, a.y * s, a.z * s};
}

template <typename T>
inline T norm(const Vec3<T>& a) {
  using std::sqrt;
  return sqrt(dot(a, a));
}

template <typename T>
inline Vec3<T> normalize(const Vec3<T>& a) {
  T n = norm(a);
  return {a.x / n, a.y / n, a.z / n};
}

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace pbrmat
