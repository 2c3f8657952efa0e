#include "gsavatar/geometry.hpp"

#include <gtest/gtest.h>

#include "gsavatar/rng.hpp"

namespace gsa {
namespace {

Camerad test_camera(int w = 64, int h = 64) {
  Camerad cam;
  cam.fx = cam.fy = 80.0;
  cam.cx = w * 0.5;
  cam.cy = h * 0.5;
  cam.width = w;
  cam.height = h;
  return cam;
}

QuatT<double> random_quat(Rng& rng) {
  QuatT<double> q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
  return q.normalized();
}

TEST(Plucker, OriginCameraHasZeroMoment) {
  Camerad cam = test_camera();
  cam.cx = 32.5;  // principal point on the center of pixel 32
  cam.cy = 32.5;
  const auto map = plucker_rays(cam);
  const double* ray = map.at(32, 32);
  EXPECT_NEAR(ray[0], 0.0, 1e-12);
  EXPECT_NEAR(ray[1], 0.0, 1e-12);
  EXPECT_NEAR(ray[2], 1.0, 1e-12);
  EXPECT_NEAR(ray[3], 0.0, 1e-12);
  EXPECT_NEAR(ray[4], 0.0, 1e-12);
  EXPECT_NEAR(ray[5], 0.0, 1e-12);
}

TEST(Plucker, TranslatedCameraMoment) {
  // Camera at (1,0,0) with identity rotation: t = -R eye = (-1,0,0).
  Camerad cam = test_camera();
  cam.cx = 32.5;
  cam.cy = 32.5;
  cam.translation = {-1.0, 0.0, 0.0};
  const auto map = plucker_rays(cam);
  const double* ray = map.at(32, 32);  // d = (0,0,1), m = (1,0,0)x(0,0,1) = (0,-1,0)
  EXPECT_NEAR(ray[0], 0.0, 1e-12);
  EXPECT_NEAR(ray[2], 1.0, 1e-12);
  EXPECT_NEAR(ray[3], 0.0, 1e-12);
  EXPECT_NEAR(ray[4], -1.0, 1e-12);
  EXPECT_NEAR(ray[5], 0.0, 1e-12);
}

TEST(Plucker, DirectionUnitAndOrthogonalEverywhere) {
  Rng rng(7);
  for (int trial = 0; trial < 4; ++trial) {
    Camerad cam = test_camera(17, 13);
    cam.cx = rng.uniform(2.0, 15.0);
    cam.cy = rng.uniform(2.0, 11.0);
    cam.rotation = random_quat(rng);
    cam.translation = {rng.normal(), rng.normal(), rng.normal()};
    const auto map = plucker_rays(cam);
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) {
        const double* r = map.at(x, y);
        const double norm = std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]);
        const double dot = r[0] * r[3] + r[1] * r[4] + r[2] * r[5];
        ASSERT_NEAR(norm, 1.0, 1e-9);
        ASSERT_NEAR(dot, 0.0, 1e-9);
      }
  }
}

TEST(Quat, IdentityGivesIdentityMatrix) {
  const auto r = quat_to_rotmat(QuatT<double>{1, 0, 0, 0});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(r.m[i][j], i == j ? 1.0 : 0.0);
}

TEST(Quat, Rotation90AboutZ) {
  const double s = std::sqrt(0.5);
  const auto r = quat_to_rotmat(QuatT<double>{s, 0, 0, s});
  const Vec3d v = r * Vec3d{1, 0, 0};
  EXPECT_NEAR(v.x, 0.0, 1e-12);
  EXPECT_NEAR(v.y, 1.0, 1e-12);
  EXPECT_NEAR(v.z, 0.0, 1e-12);
}

TEST(Quat, RandomQuaternionsGiveOrthonormalMatrices) {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const auto q = random_quat(rng);
    const auto r = quat_to_rotmat(q);
    const auto rt_r = r.transposed() * r;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) ASSERT_NEAR(rt_r.m[a][b], a == b ? 1.0 : 0.0, 1e-9);
    const double det = r.m[0][0] * (r.m[1][1] * r.m[2][2] - r.m[1][2] * r.m[2][1]) -
                       r.m[0][1] * (r.m[1][0] * r.m[2][2] - r.m[1][2] * r.m[2][0]) +
                       r.m[0][2] * (r.m[1][0] * r.m[2][1] - r.m[1][1] * r.m[2][0]);
    ASSERT_NEAR(det, 1.0, 1e-9);
  }
}

TEST(Quat, DoubleCover) {
  Rng rng(13);
  for (int i = 0; i < 50; ++i) {
    const auto q = random_quat(rng);
    const auto r1 = quat_to_rotmat(q);
    const auto r2 = quat_to_rotmat(QuatT<double>{-q.w, -q.x, -q.y, -q.z});
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) ASSERT_NEAR(r1.m[a][b], r2.m[a][b], 1e-12);
  }
}

TEST(Quat, NonUnitInputRenormalizedSilently) {
  const QuatT<double> q{2, 0, 0, 0};
  const auto r = quat_to_rotmat(q);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(r.m[i][j], i == j ? 1.0 : 0.0, 1e-12);
}

TEST(Covariance, IdentityRotationGivesDiagonalOfSquares) {
  const auto sigma = build_covariance(Vec3d{1, 2, 3}, QuatT<double>{1, 0, 0, 0});
  EXPECT_NEAR(sigma.m[0][0], 1.0, 1e-12);
  EXPECT_NEAR(sigma.m[1][1], 4.0, 1e-12);
  EXPECT_NEAR(sigma.m[2][2], 9.0, 1e-12);
  EXPECT_NEAR(sigma.m[0][1], 0.0, 1e-12);
}

// Characteristic polynomial root check: eigenvalues of Sigma must be the
// squared scales, evaluated via det(Sigma - s_k^2 I) = 0.
TEST(Covariance, EigenvaluesAreSquaredScales) {
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    const Vec3d s{rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0)};
    const auto q = random_quat(rng);
    const auto sigma = build_covariance(s, q);
    for (double lam : {s.x * s.x, s.y * s.y, s.z * s.z}) {
      Mat3T<double> a = sigma;
      a.m[0][0] -= lam;
      a.m[1][1] -= lam;
      a.m[2][2] -= lam;
      const double det = a.m[0][0] * (a.m[1][1] * a.m[2][2] - a.m[1][2] * a.m[2][1]) -
                         a.m[0][1] * (a.m[1][0] * a.m[2][2] - a.m[1][2] * a.m[2][0]) +
                         a.m[0][2] * (a.m[1][0] * a.m[2][1] - a.m[1][1] * a.m[2][0]);
      ASSERT_NEAR(det, 0.0, 1e-6);
    }
  }
}

TEST(Covariance, SymmetricPsdProperty) {
  Rng rng(19);
  for (int i = 0; i < 1000; ++i) {
    const Vec3d s{rng.uniform(0.01, 3.0), rng.uniform(0.01, 3.0), rng.uniform(0.01, 3.0)};
    const auto sigma = build_covariance(s, random_quat(rng));
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) ASSERT_EQ(sigma.m[a][b], sigma.m[b][a]);
    // PSD via random quadratic forms.
    for (int t = 0; t < 5; ++t) {
      const Vec3d v{rng.normal(), rng.normal(), rng.normal()};
      ASSERT_GE(v.dot(sigma * v), -1e-9);
    }
  }
}

TEST(Project, OnAxisGaussianLandsOnPrincipalPoint) {
  Camerad cam = test_camera();
  Gaussian3DT<double> g;
  g.position = {0, 0, 2.0};
  g.scale = {0.1, 0.1, 0.1};
  const auto p = project_gaussian(g, cam);
  ASSERT_FALSE(p.culled);
  EXPECT_NEAR(p.mean2d.x, cam.cx, 1e-12);
  EXPECT_NEAR(p.mean2d.y, cam.cy, 1e-12);
  EXPECT_NEAR(p.depth, 2.0, 1e-12);
}

TEST(Project, IsotropicOnAxisCovarianceClosedForm) {
  Camerad cam = test_camera();
  const double sigma = 0.05, z = 2.0;
  Gaussian3DT<double> g;
  g.position = {0, 0, z};
  g.scale = {sigma, sigma, sigma};
  const auto p = project_gaussian(g, cam);
  const double expected = (cam.fx * sigma / z) * (cam.fx * sigma / z) + kCovLowPass;
  EXPECT_NEAR(p.cov_xx, expected, 1e-9);
  EXPECT_NEAR(p.cov_yy, expected, 1e-9);
  EXPECT_NEAR(p.cov_xy, 0.0, 1e-9);
}

TEST(Project, BehindCameraIsCulledNotThrown) {
  Camerad cam = test_camera();
  Gaussian3DT<double> g;
  g.position = {0, 0, -1.0};
  g.scale = {0.1, 0.1, 0.1};
  EXPECT_TRUE(project_gaussian(g, cam).culled);
  g.position = {0, 0, 0.005};  // in front but inside the near plane
  EXPECT_TRUE(project_gaussian(g, cam).culled);
}

// The analytic projection Jacobian (via projected mean displacement) must
// match central finite differences.
TEST(Project, MeanJacobianMatchesFiniteDifferences) {
  Rng rng(23);
  Camerad cam = test_camera();
  cam.rotation = random_quat(rng);
  cam.translation = {0.1, -0.2, 2.5};
  const double h = 1e-4;
  for (int trial = 0; trial < 20; ++trial) {
    Gaussian3DT<double> g;
    g.position = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
    g.scale = {0.05, 0.05, 0.05};
    g.rotation = random_quat(rng);
    const auto base = project_gaussian(g, cam);
    if (base.culled) continue;

    // Analytic: J * W columns.
    const auto w = quat_to_rotmat(cam.rotation);
    const Vec3d t = w * g.position + cam.translation;
    const double jm[2][3] = {{cam.fx / t.z, 0, -cam.fx * t.x / (t.z * t.z)},
                             {0, cam.fy / t.z, -cam.fy * t.y / (t.z * t.z)}};
    for (int c = 0; c < 3; ++c) {
      Gaussian3DT<double> gp = g, gm = g;
      (c == 0 ? gp.position.x : c == 1 ? gp.position.y : gp.position.z) += h;
      (c == 0 ? gm.position.x : c == 1 ? gm.position.y : gm.position.z) -= h;
      const auto pp = project_gaussian(gp, cam);
      const auto pm = project_gaussian(gm, cam);
      const double fd_x = (pp.mean2d.x - pm.mean2d.x) / (2 * h);
      const double fd_y = (pp.mean2d.y - pm.mean2d.y) / (2 * h);
      double ax = 0, ay = 0;
      for (int k = 0; k < 3; ++k) {
        ax += jm[0][k] * w.m[k][c];
        ay += jm[1][k] * w.m[k][c];
      }
      const double rel_x = std::abs(ax - fd_x) / std::max({1.0, std::abs(ax), std::abs(fd_x)});
      const double rel_y = std::abs(ay - fd_y) / std::max({1.0, std::abs(ay), std::abs(fd_y)});
      ASSERT_LT(rel_x, 1e-4);
      ASSERT_LT(rel_y, 1e-4);
    }
  }
}

TEST(Camera, ValidationRejectsBadIntrinsics) {
  Camerad cam = test_camera();
  cam.fx = -1;
  EXPECT_THROW(cam.validate(), std::invalid_argument);
  cam = test_camera();
  cam.cx = 1000;
  EXPECT_THROW(cam.validate(), std::invalid_argument);
  cam = test_camera();
  cam.rotation = {0.5, 0.5, 0, 0};
  EXPECT_THROW(cam.validate(), std::invalid_argument);
}

TEST(Camera, LookAtProducesValidUprightCamera) {
  const auto cam = Camerad::look_at({0, 0, 2.5}, {0, 0, 0}, {0, 1, 0}, 80, 80, 32, 32, 64, 64);
  cam.validate();
  // Head-frame up (+y) should project upward in the image (decreasing v).
  const Vec3d up_point = cam.world_to_cam({0, 0.5, 0});
  EXPECT_LT(up_point.y, 0.0);
  // The camera origin recovers the eye.
  const Vec3d o = cam.origin();
  EXPECT_NEAR(o.x, 0.0, 1e-12);
  EXPECT_NEAR(o.y, 0.0, 1e-12);
  EXPECT_NEAR(o.z, 2.5, 1e-9);
}

}  // namespace
}  // namespace gsa
