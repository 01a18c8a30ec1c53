#pragma once

#include <array>
#include <cmath>

namespace paro {

/// Cartesian point/vector in at most three dimensions. 2D meshes leave z = 0.
struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

/// Small symmetric-capable 3x3 matrix used for diffusion coefficients.
struct Mat3 {
  std::array<std::array<double, 3>, 3> m{{{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}};

  static Mat3 identity(double s = 1.0) {
    Mat3 r;
    r.m[0][0] = r.m[1][1] = r.m[2][2] = s;
    return r;
  }

  Vec3 apply(const Vec3& v) const {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
  }

  double operator()(int i, int j) const { return m[i][j]; }
  double& operator()(int i, int j) { return m[i][j]; }
};

/// Axis-aligned box [lo, hi]^dim; the computational domain.
struct Box {
  int dim = 2;
  Vec3 lo, hi;

  bool contains(const Vec3& p, double tol = 0.0) const {
    for (int k = 0; k < dim; ++k) {
      if (p[k] < lo[k] - tol || p[k] > hi[k] + tol) return false;
    }
    return true;
  }

  double volume() const {
    double v = 1.0;
    for (int k = 0; k < dim; ++k) v *= hi[k] - lo[k];
    return v;
  }
};

}  // namespace paro
