#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace gsa {

// Conventions, fixed once for the whole project:
//   * camera space: +x right, +y down (image rows grow downward), +z forward;
//     a point p_world maps to p_cam = R * p_world + t with R the
//     world-to-camera rotation,
//   * quaternions are stored (w, x, y, z) and act on column vectors,
//   * pixel (ix, iy) has its center at (ix + 0.5, iy + 0.5),
//   * scene positions are expressed in the canonical head frame; head pose is
//     folded into the cameras by the data generator.

template <typename Real>
struct Vec2T {
  Real x = 0, y = 0;
};

template <typename Real>
struct Vec3T {
  Real x = 0, y = 0, z = 0;

  Vec3T operator+(const Vec3T& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3T operator-(const Vec3T& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3T operator*(Real s) const { return {x * s, y * s, z * s}; }
  Vec3T& operator+=(const Vec3T& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  Real dot(const Vec3T& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3T cross(const Vec3T& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  Real norm() const { return std::sqrt(dot(*this)); }
  Vec3T normalized() const {
    const Real n = norm();
    return n > Real(0) ? Vec3T{x / n, y / n, z / n} : Vec3T{0, 0, 0};
  }
};

template <typename Real>
struct QuatT {
  Real w = 1, x = 0, y = 0, z = 0;

  Real norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
  QuatT normalized() const {
    const Real n = norm();
    if (n == Real(0)) return QuatT{1, 0, 0, 0};
    return {w / n, x / n, y / n, z / n};
  }
};

template <typename Real>
struct Mat3T {
  Real m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

  static Mat3T zero() {
    Mat3T r;
    for (auto& row : r.m) row[0] = row[1] = row[2] = 0;
    return r;
  }
  Vec3T<Real> operator*(const Vec3T<Real>& v) const {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
  }
  Mat3T operator*(const Mat3T& o) const {
    Mat3T r = zero();
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j) r.m[i][j] += m[i][k] * o.m[k][j];
    return r;
  }
  Mat3T transposed() const {
    Mat3T r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
    return r;
  }
};

// Rotation matrix for q. A quaternion off unit norm (beyond ~1e-6) is
// renormalized silently; callers relying on exact unit input should normalize
// themselves.
template <typename Real>
Mat3T<Real> quat_to_rotmat(const QuatT<Real>& q_in) {
  const QuatT<Real> q = q_in.normalized();
  const Real w = q.w, x = q.x, y = q.y, z = q.z;
  Mat3T<Real> r;
  r.m[0][0] = 1 - 2 * (y * y + z * z);
  r.m[0][1] = 2 * (x * y - w * z);
  r.m[0][2] = 2 * (x * z + w * y);
  r.m[1][0] = 2 * (x * y + w * z);
  r.m[1][1] = 1 - 2 * (x * x + z * z);
  r.m[1][2] = 2 * (y * z - w * x);
  r.m[2][0] = 2 * (x * z - w * y);
  r.m[2][1] = 2 * (y * z + w * x);
  r.m[2][2] = 1 - 2 * (x * x + y * y);
  return r;
}

template <typename Real>
QuatT<Real> rotmat_to_quat(const Mat3T<Real>& r);

// Sigma = R * diag(s)^2 * R^T. Symmetric PSD by construction.
template <typename Real>
Mat3T<Real> build_covariance(const Vec3T<Real>& s, const QuatT<Real>& q);

template <typename Real>
struct CameraT {
  Real fx = 0, fy = 0, cx = 0, cy = 0;
  QuatT<Real> rotation;     // world-to-camera
  Vec3T<Real> translation;  // p_cam = R p_world + t
  int width = 0, height = 0;

  void validate() const {
    if (!(fx > 0) || !(fy > 0)) throw std::invalid_argument("camera: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw std::invalid_argument("camera: bad image dimensions");
    if (std::abs(rotation.norm() - Real(1)) > Real(1e-5))
      throw std::invalid_argument("camera: rotation quaternion not unit");
    if (!(cx >= 0 && cx < Real(width) && cy >= 0 && cy < Real(height)))
      throw std::invalid_argument("camera: principal point outside image");
  }

  Vec3T<Real> world_to_cam(const Vec3T<Real>& p) const {
    return quat_to_rotmat(rotation) * p + translation;
  }

  // Camera origin in world coordinates: -R^T t.
  Vec3T<Real> origin() const {
    const Mat3T<Real> rt = quat_to_rotmat(rotation).transposed();
    const Vec3T<Real> o = rt * translation;
    return {-o.x, -o.y, -o.z};
  }

  // Same pose, intrinsics rescaled to a new resolution.
  CameraT scaled(int new_w, int new_h) const {
    CameraT c = *this;
    const Real sx = Real(new_w) / Real(width);
    const Real sy = Real(new_h) / Real(height);
    c.fx *= sx;
    c.cx *= sx;
    c.fy *= sy;
    c.cy *= sy;
    c.width = new_w;
    c.height = new_h;
    return c;
  }

  template <typename Other>
  CameraT<Other> cast() const {
    CameraT<Other> c;
    c.fx = static_cast<Other>(fx);
    c.fy = static_cast<Other>(fy);
    c.cx = static_cast<Other>(cx);
    c.cy = static_cast<Other>(cy);
    c.rotation = {static_cast<Other>(rotation.w), static_cast<Other>(rotation.x),
                  static_cast<Other>(rotation.y), static_cast<Other>(rotation.z)};
    c.translation = {static_cast<Other>(translation.x), static_cast<Other>(translation.y),
                     static_cast<Other>(translation.z)};
    c.width = width;
    c.height = height;
    return c;
  }

  static CameraT look_at(const Vec3T<Real>& eye, const Vec3T<Real>& target, const Vec3T<Real>& up,
                         Real fx, Real fy, Real cx, Real cy, int width, int height);
};

// Per-pixel ray as (direction d, moment m = o x d), both in world coordinates
// with d unit length. Row-major, 6 values per pixel: dx dy dz mx my mz.
template <typename Real>
struct PluckerMapT {
  int width = 0, height = 0;
  std::vector<Real> data;

  const Real* at(int x, int y) const { return data.data() + 6 * (static_cast<size_t>(y) * width + x); }
};

template <typename Real>
PluckerMapT<Real> plucker_rays(const CameraT<Real>& camera);

template <typename Real>
struct Gaussian3DT {
  Vec3T<Real> position;
  Vec3T<Real> scale;  // positive standard deviations along local axes
  QuatT<Real> rotation;
  Vec3T<Real> color;  // [0,1]
  Real opacity = 0;   // [0,1]
};

// Screen-space footprint of one Gaussian. cov2d already contains the 0.3 px^2
// low-pass term, so it is invertible for any input.
template <typename Real>
struct Projected2DT {
  Vec2T<Real> mean2d;
  Real cov_xx = 0, cov_xy = 0, cov_yy = 0;
  Real depth = 0;  // camera-space z
  bool culled = false;
};

inline constexpr double kNearPlane = 0.01;  // scene units
inline constexpr double kCovLowPass = 0.3;  // px^2, guarantees >= 1 px footprint

template <typename Real>
Projected2DT<Real> project_gaussian(const Gaussian3DT<Real>& g, const CameraT<Real>& camera);

using Camerad = CameraT<double>;
using Cameraf = CameraT<float>;
using Vec3f = Vec3T<float>;
using Vec3d = Vec3T<double>;
using Quatf = QuatT<float>;

}  // namespace gsa
