#pragma once

// Minimal 3-vector / symmetric 3x3 matrix types.  These are deliberately
// plain aggregates: the library passes them by value and serializes them as
// JSON arrays.

#include <array>
#include <cmath>

#include "covdec/common.hpp"

namespace covdec {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
constexpr Vec3 operator-(Vec3 a) { return {-a.x, -a.y, -a.z}; }
constexpr Vec3 operator*(double c, Vec3 a) { return {c * a.x, c * a.y, c * a.z}; }
constexpr Vec3 operator*(Vec3 a, double c) { return c * a; }
constexpr Vec3 operator/(Vec3 a, double c) { return {a.x / c, a.y / c, a.z / c}; }

constexpr double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr double norm2(Vec3 a) { return dot(a, a); }
inline double norm(Vec3 a) { return std::sqrt(norm2(a)); }

inline bool is_finite(Vec3 a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

// Unit vector along a; throws on (near-)zero input.
inline Vec3 normalized(Vec3 a) {
  const double n = norm(a);
  require(n > 0.0 && std::isfinite(n), "cannot normalize zero/non-finite vector");
  return a / n;
}

// Two unit vectors orthogonal to axis (and each other), chosen
// deterministically.  Used for building orthonormal frames around a momentum
// direction.
inline void orthonormal_frame(Vec3 axis, Vec3& e1, Vec3& e2) {
  const Vec3 n = normalized(axis);
  // Helper axis: the coordinate direction least aligned with n.
  Vec3 h = {1.0, 0.0, 0.0};
  if (std::fabs(n.y) < std::fabs(n.x)) h = {0.0, 1.0, 0.0};
  const double hx = std::fabs(dot(h, n));
  if (std::fabs(n.z) < hx) h = {0.0, 0.0, 1.0};
  e1 = normalized(h - dot(h, n) * n);
  e2 = {n.y * e1.z - n.z * e1.y, n.z * e1.x - n.x * e1.z, n.x * e1.y - n.y * e1.x};
}

// Row-major symmetric-intent 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{};

  constexpr double& operator()(int i, int j) { return m[static_cast<std::size_t>(3 * i + j)]; }
  constexpr double operator()(int i, int j) const { return m[static_cast<std::size_t>(3 * i + j)]; }

  static constexpr Mat3 zero() { return Mat3{}; }

  static constexpr Mat3 identity() {
    Mat3 r{};
    r(0, 0) = r(1, 1) = r(2, 2) = 1.0;
    return r;
  }

  static constexpr Mat3 diagonal(double a, double b, double c) {
    Mat3 r{};
    r(0, 0) = a;
    r(1, 1) = b;
    r(2, 2) = c;
    return r;
  }
};

inline bool is_finite(const Mat3& a) {
  for (double v : a.m)
    if (!std::isfinite(v)) return false;
  return true;
}

inline double max_abs(const Mat3& a) {
  double r = 0.0;
  for (double v : a.m) r = std::max(r, std::fabs(v));
  return r;
}

// x^T A x for symmetric A.
inline double quad_form(const Mat3& a, Vec3 x) {
  return a(0, 0) * x.x * x.x + a(1, 1) * x.y * x.y + a(2, 2) * x.z * x.z +
         2.0 * (a(0, 1) * x.x * x.y + a(0, 2) * x.x * x.z + a(1, 2) * x.y * x.z);
}

}  // namespace covdec
