#include "gsavatar/geometry.hpp"

namespace gsa {

template <typename Real>
QuatT<Real> rotmat_to_quat(const Mat3T<Real>& r) {
  // Shepperd's method: pick the largest diagonal combination for stability.
  const Real trace = r.m[0][0] + r.m[1][1] + r.m[2][2];
  QuatT<Real> q;
  if (trace > 0) {
    const Real s = std::sqrt(trace + 1) * 2;
    q.w = s / 4;
    q.x = (r.m[2][1] - r.m[1][2]) / s;
    q.y = (r.m[0][2] - r.m[2][0]) / s;
    q.z = (r.m[1][0] - r.m[0][1]) / s;
  } else if (r.m[0][0] > r.m[1][1] && r.m[0][0] > r.m[2][2]) {
    const Real s = std::sqrt(1 + r.m[0][0] - r.m[1][1] - r.m[2][2]) * 2;
    q.w = (r.m[2][1] - r.m[1][2]) / s;
    q.x = s / 4;
    q.y = (r.m[0][1] + r.m[1][0]) / s;
    q.z = (r.m[0][2] + r.m[2][0]) / s;
  } else if (r.m[1][1] > r.m[2][2]) {
    const Real s = std::sqrt(1 + r.m[1][1] - r.m[0][0] - r.m[2][2]) * 2;
    q.w = (r.m[0][2] - r.m[2][0]) / s;
    q.x = (r.m[0][1] + r.m[1][0]) / s;
    q.y = s / 4;
    q.z = (r.m[1][2] + r.m[2][1]) / s;
  } else {
    const Real s = std::sqrt(1 + r.m[2][2] - r.m[0][0] - r.m[1][1]) * 2;
    q.w = (r.m[1][0] - r.m[0][1]) / s;
    q.x = (r.m[0][2] + r.m[2][0]) / s;
    q.y = (r.m[1][2] + r.m[2][1]) / s;
    q.z = s / 4;
  }
  return q.normalized();
}

template <typename Real>
Mat3T<Real> build_covariance(const Vec3T<Real>& s, const QuatT<Real>& q) {
  const Mat3T<Real> r = quat_to_rotmat(q);
  // M = R diag(s); Sigma = M M^T, symmetric by construction.
  Mat3T<Real> m = Mat3T<Real>::zero();
  const Real sv[3] = {s.x, s.y, s.z};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m.m[i][j] = r.m[i][j] * sv[j];
  Mat3T<Real> sigma = Mat3T<Real>::zero();
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      Real acc = 0;
      for (int k = 0; k < 3; ++k) acc += m.m[i][k] * m.m[j][k];
      sigma.m[i][j] = acc;
      sigma.m[j][i] = acc;
    }
  return sigma;
}

template <typename Real>
CameraT<Real> CameraT<Real>::look_at(const Vec3T<Real>& eye, const Vec3T<Real>& target,
                                     const Vec3T<Real>& up, Real fx, Real fy, Real cx, Real cy,
                                     int width, int height) {
  const Vec3T<Real> fwd = (target - eye).normalized();
  Vec3T<Real> right = fwd.cross(up).normalized();
  if (right.norm() < Real(0.5)) throw std::invalid_argument("look_at: forward parallel to up");
  const Vec3T<Real> down = fwd.cross(right);  // completes a right-handed (x,y,z) frame
  Mat3T<Real> r;
  r.m[0][0] = right.x;
  r.m[0][1] = right.y;
  r.m[0][2] = right.z;
  r.m[1][0] = down.x;
  r.m[1][1] = down.y;
  r.m[1][2] = down.z;
  r.m[2][0] = fwd.x;
  r.m[2][1] = fwd.y;
  r.m[2][2] = fwd.z;
  CameraT<Real> cam;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = cx;
  cam.cy = cy;
  cam.width = width;
  cam.height = height;
  cam.rotation = rotmat_to_quat(r);
  const Vec3T<Real> t = r * eye;
  cam.translation = {-t.x, -t.y, -t.z};
  return cam;
}

template <typename Real>
PluckerMapT<Real> plucker_rays(const CameraT<Real>& camera) {
  camera.validate();
  PluckerMapT<Real> map;
  map.width = camera.width;
  map.height = camera.height;
  map.data.resize(static_cast<size_t>(camera.width) * camera.height * 6);
  const Mat3T<Real> r_t = quat_to_rotmat(camera.rotation).transposed();
  const Vec3T<Real> origin = camera.origin();
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const Vec3T<Real> dir_cam{(Real(x) + Real(0.5) - camera.cx) / camera.fx,
                                (Real(y) + Real(0.5) - camera.cy) / camera.fy, Real(1)};
      const Vec3T<Real> d = (r_t * dir_cam).normalized();
      const Vec3T<Real> m = origin.cross(d);
      Real* out = map.data.data() + 6 * (static_cast<size_t>(y) * camera.width + x);
      out[0] = d.x;
      out[1] = d.y;
      out[2] = d.z;
      out[3] = m.x;
      out[4] = m.y;
      out[5] = m.z;
    }
  }
  return map;
}

template <typename Real>
Projected2DT<Real> project_gaussian(const Gaussian3DT<Real>& g, const CameraT<Real>& camera) {
  Projected2DT<Real> out;
  const Mat3T<Real> w = quat_to_rotmat(camera.rotation);
  const Vec3T<Real> t = w * g.position + camera.translation;
  if (!(t.z > Real(kNearPlane))) {
    out.culled = true;
    return out;
  }
  out.depth = t.z;
  const Real inv_z = Real(1) / t.z;
  out.mean2d = {camera.fx * t.x * inv_z + camera.cx, camera.fy * t.y * inv_z + camera.cy};

  // J is the Jacobian of the pinhole projection at t; T = J W maps world
  // displacements to pixel displacements.
  const Real inv_z2 = inv_z * inv_z;
  const Real j00 = camera.fx * inv_z;
  const Real j02 = -camera.fx * t.x * inv_z2;
  const Real j11 = camera.fy * inv_z;
  const Real j12 = -camera.fy * t.y * inv_z2;

  Real tm[2][3];
  for (int c = 0; c < 3; ++c) {
    tm[0][c] = j00 * w.m[0][c] + j02 * w.m[2][c];
    tm[1][c] = j11 * w.m[1][c] + j12 * w.m[2][c];
  }
  const Mat3T<Real> sigma = build_covariance(g.scale, g.rotation);
  Real st[3][2];
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 2; ++c)
      st[i][c] = sigma.m[i][0] * tm[c][0] + sigma.m[i][1] * tm[c][1] + sigma.m[i][2] * tm[c][2];
  out.cov_xx = tm[0][0] * st[0][0] + tm[0][1] * st[1][0] + tm[0][2] * st[2][0] + Real(kCovLowPass);
  out.cov_xy = tm[0][0] * st[0][1] + tm[0][1] * st[1][1] + tm[0][2] * st[2][1];
  out.cov_yy = tm[1][0] * st[0][1] + tm[1][1] * st[1][1] + tm[1][2] * st[2][1] + Real(kCovLowPass);
  return out;
}

template QuatT<float> rotmat_to_quat(const Mat3T<float>&);
template QuatT<double> rotmat_to_quat(const Mat3T<double>&);
template Mat3T<float> build_covariance(const Vec3T<float>&, const QuatT<float>&);
template Mat3T<double> build_covariance(const Vec3T<double>&, const QuatT<double>&);
template struct CameraT<float>;
template struct CameraT<double>;
template PluckerMapT<float> plucker_rays(const CameraT<float>&);
template PluckerMapT<double> plucker_rays(const CameraT<double>&);
template Projected2DT<float> project_gaussian(const Gaussian3DT<float>&, const CameraT<float>&);
template Projected2DT<double> project_gaussian(const Gaussian3DT<double>&, const CameraT<double>&);

}  // namespace gsa
