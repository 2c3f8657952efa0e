#include "gsavatar/rasterizer.hpp"

#include <gtest/gtest.h>

#include <algorithm>

#include "gsavatar/parallel.hpp"
#include "gsavatar/rng.hpp"

namespace gsa {
namespace {

template <typename Real>
CameraT<Real> scene_camera(int w, int h) {
  CameraT<Real> cam;
  cam.fx = cam.fy = Real(1.25) * w;
  cam.cx = w * Real(0.5);
  cam.cy = h * Real(0.5);
  cam.width = w;
  cam.height = h;
  return cam;
}

// Random in-frustum scenes. Colors come from a correlated palette (as head
// crops do) so skipped sub-cutoff fringes stay small against the oracle;
// depths are separated well beyond the finite-difference step.
template <typename Real>
GaussianSetT<Real> random_scene(Rng& rng, int n, double color_spread = 0.9) {
  GaussianSetT<Real> set;
  const Vec3T<Real> base{Real(rng.uniform(0.1, 0.9)), Real(rng.uniform(0.1, 0.9)),
                         Real(rng.uniform(0.1, 0.9))};
  for (int i = 0; i < n; ++i) {
    Gaussian3DT<Real> g;
    g.position = {Real(rng.uniform(-0.45, 0.45)), Real(rng.uniform(-0.45, 0.45)),
                  Real(2.0 + 0.03 * i + rng.uniform(0.0, 0.02))};
    g.scale = {Real(rng.uniform(0.01, 0.05)), Real(rng.uniform(0.01, 0.05)),
               Real(rng.uniform(0.01, 0.05))};
    g.rotation = QuatT<Real>{Real(rng.normal()), Real(rng.normal()), Real(rng.normal()),
                             Real(rng.normal())}
                     .normalized();
    auto chan = [&](Real b) {
      return Real(std::clamp(double(b) + color_spread * rng.uniform(-0.5, 0.5), 0.02, 0.98));
    };
    g.color = {chan(base.x), chan(base.y), chan(base.z)};
    g.opacity = Real(rng.uniform(0.25, 0.9));
    set.push(g, -1);
  }
  return set;
}

TEST(Rasterize, EmptySetGivesBackground) {
  const auto cam = scene_camera<float>(32, 32);
  const Vec3f bg{0.2f, 0.4f, 0.6f};
  const auto out = rasterize(GaussianSet{}, cam, bg);
  for (size_t p = 0; p < out.pixels(); ++p) {
    ASSERT_EQ(out.image[p * 3 + 0], bg.x);
    ASSERT_EQ(out.image[p * 3 + 1], bg.y);
    ASSERT_EQ(out.image[p * 3 + 2], bg.z);
    ASSERT_EQ(out.alpha[p], 0.0f);
    ASSERT_EQ(out.contrib_count[p], 0);
  }
}

TEST(Rasterize, SingleSplatClosedFormAtCenter) {
  // Principal point on the center of pixel (32,32); footprint much larger
  // than one pixel, so the pixel there sees alpha ~= opacity.
  auto cam = scene_camera<float>(64, 64);
  cam.cx = cam.cy = 32.5f;
  GaussianSet set;
  Gaussian3DT<float> g;
  g.position = {0, 0, 2};
  g.scale = {0.25f, 0.25f, 0.25f};
  g.color = {0.8f, 0.1f, 0.5f};
  g.opacity = 0.7f;
  set.push(g, -1);
  const Vec3f bg{0.05f, 0.05f, 0.2f};
  const auto out = rasterize(set, cam, bg);
  const size_t pix = 32 * 64 + 32;
  EXPECT_NEAR(out.image[pix * 3 + 0], 0.7 * 0.8 + 0.3 * 0.05, 1e-3);
  EXPECT_NEAR(out.image[pix * 3 + 1], 0.7 * 0.1 + 0.3 * 0.05, 1e-3);
  EXPECT_NEAR(out.image[pix * 3 + 2], 0.7 * 0.5 + 0.3 * 0.2, 1e-3);
  EXPECT_NEAR(out.alpha[pix], 0.7, 1e-3);
}

// The tile path differs from the cutoff-free oracle only by the documented
// cutoffs: the mean per-channel deviation stays well under 1e-3, and no
// single pixel may deviate by more than a few alpha-cutoff quanta.
TEST(Rasterize, MatchesBruteForceOracle) {
  Rng rng(101);
  const auto cam = scene_camera<float>(64, 64);
  const Vec3f bg{0.1f, 0.1f, 0.1f};
  double worst_mean = 0, worst_point = 0;
  for (int scene = 0; scene < 40; ++scene) {
    const int n = 1 + int(rng.uniform_int(50));
    const auto set = random_scene<float>(rng, n);
    const auto tile = rasterize(set, cam, bg);
    const auto ref = reference_rasterize(set, cam, bg);
    double mean[3] = {0, 0, 0};
    for (size_t i = 0; i < tile.image.size(); ++i) {
      const double d = std::abs(double(tile.image[i]) - double(ref.image[i]));
      mean[i % 3] += d;
      worst_point = std::max(worst_point, d);
    }
    for (int c = 0; c < 3; ++c)
      worst_mean = std::max(worst_mean, mean[c] / double(tile.pixels()));
  }
  EXPECT_LT(worst_mean, 1e-3);
  EXPECT_LT(worst_point, 6.0 / 255.0);
}

TEST(Rasterize, OracleOrderInvariantAfterSort) {
  Rng rng(103);
  const auto cam = scene_camera<float>(48, 48);
  const Vec3f bg{0, 0, 0};
  const auto set = random_scene<float>(rng, 20);
  // Reverse the input order; depths are distinct so the deterministic sort
  // restores the exact compositing order.
  GaussianSet rev;
  for (size_t i = set.size(); i-- > 0;) rev.push(set.get(i), -1);
  const auto a = reference_rasterize(set, cam, bg);
  const auto b = reference_rasterize(rev, cam, bg);
  for (size_t i = 0; i < a.image.size(); ++i) ASSERT_EQ(a.image[i], b.image[i]);
}

TEST(Rasterize, DeterministicAcrossRunsAndThreadCounts) {
  Rng rng(105);
  const auto cam = scene_camera<float>(64, 64);
  const Vec3f bg{0.3f, 0.2f, 0.1f};
  const auto set = random_scene<float>(rng, 40);
  std::vector<float> d_image(size_t(64) * 64 * 3, 0.25f);

  ThreadPool::set_global_workers(1);
  const auto out1 = rasterize(set, cam, bg);
  const auto g1 = rasterize_backward(set, cam, bg, d_image, out1);
  ThreadPool::set_global_workers(5);
  const auto out5 = rasterize(set, cam, bg);
  const auto g5 = rasterize_backward(set, cam, bg, d_image, out5);
  ThreadPool::set_global_workers(1);

  for (size_t i = 0; i < out1.image.size(); ++i) ASSERT_EQ(out1.image[i], out5.image[i]);
  for (size_t i = 0; i < out1.alpha.size(); ++i) ASSERT_EQ(out1.alpha[i], out5.alpha[i]);
  for (size_t i = 0; i < g1.size(); ++i) {
    ASSERT_EQ(g1.d_position[i].x, g5.d_position[i].x);
    ASSERT_EQ(g1.d_scale[i].y, g5.d_scale[i].y);
    ASSERT_EQ(g1.d_rotation[i].w, g5.d_rotation[i].w);
    ASSERT_EQ(g1.d_color[i].z, g5.d_color[i].z);
    ASSERT_EQ(g1.d_opacity[i], g5.d_opacity[i]);
  }
}

TEST(Rasterize, AlphaAndImageBounds) {
  Rng rng(107);
  const auto cam = scene_camera<float>(48, 48);
  const Vec3f bg{0.5f, 0.5f, 0.5f};
  for (int scene = 0; scene < 10; ++scene) {
    const auto set = random_scene<float>(rng, 30);
    const auto out = rasterize(set, cam, bg);
    for (size_t p = 0; p < out.pixels(); ++p) {
      ASSERT_GE(out.alpha[p], 0.0f);
      ASSERT_LE(out.alpha[p], 1.0f);
      for (int c = 0; c < 3; ++c) {
        ASSERT_GE(out.image[p * 3 + c], 0.0f);
        ASSERT_LE(out.image[p * 3 + c], 1.5f);  // 1 + max background
        ASSERT_TRUE(std::isfinite(out.image[p * 3 + c]));
      }
    }
  }
}

TEST(RasterizeBackward, ZeroUpstreamGivesZeroGradients) {
  Rng rng(109);
  const auto cam = scene_camera<float>(32, 32);
  const auto set = random_scene<float>(rng, 10);
  const Vec3f bg{0, 0, 0};
  const auto out = rasterize(set, cam, bg);
  const std::vector<float> d_image(out.pixels() * 3, 0.0f);
  const auto g = rasterize_backward(set, cam, bg, d_image, out);
  for (size_t i = 0; i < g.size(); ++i) {
    ASSERT_EQ(g.d_position[i].x, 0.0f);
    ASSERT_EQ(g.d_scale[i].x, 0.0f);
    ASSERT_EQ(g.d_rotation[i].x, 0.0f);
    ASSERT_EQ(g.d_color[i].x, 0.0f);
    ASSERT_EQ(g.d_opacity[i], 0.0f);
  }
}

TEST(RasterizeBackward, SingleSplatColorGradientIsAccumulatedWeight) {
  // loss = mean pixel intensity: d image = 1/(3 H W); for one splat with
  // T == 1 everywhere, d loss/d color_c = sum(alpha) / (3 H W) for every c.
  auto cam = scene_camera<float>(64, 64);
  GaussianSet set;
  Gaussian3DT<float> g;
  g.position = {0.05f, -0.03f, 2};
  g.scale = {0.08f, 0.08f, 0.08f};
  g.color = {0.3f, 0.6f, 0.9f};
  g.opacity = 0.55f;
  set.push(g, -1);
  const Vec3f bg{0, 0, 0};
  const auto out = rasterize(set, cam, bg);
  const double denom = 3.0 * out.pixels();
  std::vector<float> d_image(out.pixels() * 3, float(1.0 / denom));
  const auto grads = rasterize_backward(set, cam, bg, d_image, out);
  double alpha_sum = 0;
  for (float a : out.alpha) alpha_sum += a;
  const double expected = alpha_sum / denom;
  EXPECT_GT(grads.d_color[0].x, 0.0f);
  EXPECT_NEAR(grads.d_color[0].x, expected, 1e-6 * expected + 1e-12);
  EXPECT_NEAR(grads.d_color[0].y, expected, 1e-6 * expected + 1e-12);
  EXPECT_NEAR(grads.d_color[0].z, expected, 1e-6 * expected + 1e-12);
}

TEST(RasterizeBackward, MismatchedAuxIsRejected) {
  Rng rng(113);
  const auto cam = scene_camera<float>(32, 32);
  const auto set = random_scene<float>(rng, 8);
  const Vec3f bg{0, 0, 0};
  auto out = rasterize(set, cam, bg);
  std::vector<float> d_image(out.pixels() * 3, 0.5f);
  out.transmittance[5] += 0.25f;  // tampered aux
  EXPECT_THROW(rasterize_backward(set, cam, bg, d_image, out), std::invalid_argument);
}

// Central finite differences on every attribute of every Gaussian, double
// precision. The forward is piecewise smooth: if the h=1e-4 stencil straddles
// an alpha-cutoff or transmittance-stop boundary the estimate diverges like
// jump/h, so such coordinates retry with a smaller step, which moves the
// stencil off the boundary; a genuine gradient bug stays wrong at every step.
class FdCheck {
 public:
  FdCheck(const GaussianSetT<double>& set, const CameraT<double>& cam, const Vec3T<double>& bg,
          const std::vector<double>& d_image)
      : set_(set), cam_(cam), bg_(bg), d_image_(d_image) {}

  double loss(const GaussianSetT<double>& s) const {
    const auto out = rasterize(s, cam_, bg_);
    double acc = 0;
    for (size_t i = 0; i < out.image.size(); ++i) acc += d_image_[i] * out.image[i];
    return acc;
  }

  // Returns the relative error (floored normalization) of the best estimate.
  double check(double analytic, const std::function<void(GaussianSetT<double>&, double)>& bump) {
    double best = 1e30;
    for (const double h : {1e-4, 1e-5, 1e-6}) {
      GaussianSetT<double> plus = set_, minus = set_;
      bump(plus, h);
      bump(minus, -h);
      const double fd = (loss(plus) - loss(minus)) / (2 * h);
      const double rel = std::abs(analytic - fd) / std::max({1.0, std::abs(analytic), std::abs(fd)});
      best = std::min(best, rel);
      if (best < 1e-3) break;
    }
    return best;
  }

 private:
  const GaussianSetT<double>& set_;
  const CameraT<double>& cam_;
  const Vec3T<double>& bg_;
  const std::vector<double>& d_image_;
};

TEST(RasterizeBackward, FiniteDifferenceAllAttributes) {
  Rng rng(211);
  const auto cam = scene_camera<double>(32, 32);
  const Vec3T<double> bg{0.1, 0.2, 0.05};
  int checked = 0;
  double worst = 0;
  for (int scene = 0; scene < 6; ++scene) {
    const int n = 3 + int(rng.uniform_int(18));
    const auto set = random_scene<double>(rng, n);
    std::vector<double> d_image(size_t(32) * 32 * 3);
    for (auto& v : d_image) v = rng.uniform(-1.0, 1.0);
    const auto out = rasterize(set, cam, bg);
    const auto grads = rasterize_backward(set, cam, bg, d_image, out);
    FdCheck fd(set, cam, bg, d_image);

    for (size_t i = 0; i < set.size(); i += 2) {  // every other splat, all attributes
      for (int c = 0; c < 3; ++c) {
        const double a_pos = c == 0   ? grads.d_position[i].x
                             : c == 1 ? grads.d_position[i].y
                                      : grads.d_position[i].z;
        worst = std::max(worst, fd.check(a_pos, [i, c](GaussianSetT<double>& s, double h) {
          (c == 0 ? s.positions[i].x : c == 1 ? s.positions[i].y : s.positions[i].z) += h;
        }));
        const double a_scale = c == 0   ? grads.d_scale[i].x
                               : c == 1 ? grads.d_scale[i].y
                                        : grads.d_scale[i].z;
        worst = std::max(worst, fd.check(a_scale, [i, c](GaussianSetT<double>& s, double h) {
          (c == 0 ? s.scales[i].x : c == 1 ? s.scales[i].y : s.scales[i].z) += h;
        }));
        const double a_col = c == 0   ? grads.d_color[i].x
                             : c == 1 ? grads.d_color[i].y
                                      : grads.d_color[i].z;
        worst = std::max(worst, fd.check(a_col, [i, c](GaussianSetT<double>& s, double h) {
          (c == 0 ? s.colors[i].x : c == 1 ? s.colors[i].y : s.colors[i].z) += h;
        }));
      }
      for (int c = 0; c < 4; ++c) {
        const double a_rot = c == 0   ? grads.d_rotation[i].w
                             : c == 1 ? grads.d_rotation[i].x
                             : c == 2 ? grads.d_rotation[i].y
                                      : grads.d_rotation[i].z;
        worst = std::max(worst, fd.check(a_rot, [i, c](GaussianSetT<double>& s, double h) {
          (c == 0   ? s.rotations[i].w
           : c == 1 ? s.rotations[i].x
           : c == 2 ? s.rotations[i].y
                    : s.rotations[i].z) += h;
        }));
      }
      worst = std::max(worst, fd.check(grads.d_opacity[i], [i](GaussianSetT<double>& s, double h) {
        s.opacities[i] += h;
      }));
      checked += 14;
    }
  }
  EXPECT_GT(checked, 300);
  EXPECT_LT(worst, 1e-3) << "worst relative error " << worst;
}

TEST(Rasterize, CulledGaussiansGetZeroGradient) {
  auto cam = scene_camera<float>(32, 32);
  GaussianSet set;
  Gaussian3DT<float> front;
  front.position = {0, 0, 2};
  front.scale = {0.05f, 0.05f, 0.05f};
  front.color = {1, 0, 0};
  front.opacity = 0.8f;
  set.push(front, -1);
  Gaussian3DT<float> behind = front;
  behind.position = {0, 0, -1};  // behind the camera
  set.push(behind, -1);
  const Vec3f bg{0, 0, 0};
  const auto out = rasterize(set, cam, bg);
  std::vector<float> d_image(out.pixels() * 3, 1.0f);
  const auto g = rasterize_backward(set, cam, bg, d_image, out);
  EXPECT_NE(g.d_color[0].x, 0.0f);
  EXPECT_EQ(g.d_position[1].x, 0.0f);
  EXPECT_EQ(g.d_color[1].x, 0.0f);
  EXPECT_EQ(g.d_opacity[1], 0.0f);
}

}  // namespace
}  // namespace gsa
