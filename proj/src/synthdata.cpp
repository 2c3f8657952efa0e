#include "gsavatar/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace gsa {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kGoldenAngle = 2.39996322972865332;

Vec3f lerp3(const Vec3f& a, const Vec3f& b, float t) {
  return {a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t, a.z + (b.z - a.z) * t};
}

// Quaternion rotating +z onto dir (unit).
Quatf z_to_dir(const Vec3f& dir) {
  const Vec3f z{0, 0, 1};
  const float c = z.dot(dir);
  if (c > 0.99999f) return {1, 0, 0, 0};
  if (c < -0.99999f) return {0, 1, 0, 0};  // 180 degrees about x
  const Vec3f axis = z.cross(dir).normalized();
  const float half = std::acos(std::clamp(c, -1.0f, 1.0f)) * 0.5f;
  const float s = std::sin(half);
  return Quatf{std::cos(half), axis.x * s, axis.y * s, axis.z * s}.normalized();
}

struct ShellSpec {
  Vec3f center;
  Vec3f semi;            // ellipsoid semi-axes
  int count = 0;
  Vec3f color;
  float color_wave = 0.04f;  // low-frequency color variation amplitude
  float opacity = 0.9f;
  float tangent_mult = 1.0f;
  float flatness = 0.38f;  // normal-direction scale relative to tangent
};

// Gaussians on a Fibonacci-sampled ellipsoid surface, oriented to the local
// normal. `filter` may reject unit-sphere points before scaling.
void add_shell(GaussianSet& set, Rng& rng, const ShellSpec& sp,
               const std::function<bool(const Vec3f&)>& filter = {}) {
  const float mean_r = (sp.semi.x + sp.semi.y + sp.semi.z) / 3.0f;
  const float tangent = 0.85f * 2.0f * mean_r / std::sqrt(float(sp.count)) * sp.tangent_mult;
  const Vec3f wave{float(rng.uniform(1.5, 4.0)), float(rng.uniform(1.5, 4.0)),
                   float(rng.uniform(1.5, 4.0))};
  const Vec3f phase{float(rng.uniform(0, 2 * kPi)), float(rng.uniform(0, 2 * kPi)),
                    float(rng.uniform(0, 2 * kPi))};
  for (int i = 0; i < sp.count; ++i) {
    const float y = 1.0f - 2.0f * (i + 0.5f) / sp.count;
    const float rho = std::sqrt(std::max(0.0f, 1.0f - y * y));
    const float ang = float(i * kGoldenAngle);
    const Vec3f unit{rho * std::cos(ang), y, rho * std::sin(ang)};
    if (filter && !filter(unit)) continue;
    Gaussian3DT<float> g;
    g.position = {sp.center.x + unit.x * sp.semi.x, sp.center.y + unit.y * sp.semi.y,
                  sp.center.z + unit.z * sp.semi.z};
    const Vec3f normal =
        Vec3f{unit.x / sp.semi.x, unit.y / sp.semi.y, unit.z / sp.semi.z}.normalized();
    g.rotation = z_to_dir(normal);
    g.scale = {tangent, tangent, tangent * sp.flatness};
    const float s = std::sin(wave.x * g.position.x + wave.y * g.position.y +
                             wave.z * g.position.z + phase.x);
    const float s2 = std::sin(wave.y * g.position.x + wave.z * g.position.y +
                              wave.x * g.position.z + phase.y);
    g.color = {std::clamp(sp.color.x + sp.color_wave * s, 0.02f, 0.98f),
               std::clamp(sp.color.y + sp.color_wave * s2, 0.02f, 0.98f),
               std::clamp(sp.color.z + sp.color_wave * 0.5f * (s + s2), 0.02f, 0.98f)};
    g.opacity = sp.opacity;
    set.push(g, -1);
  }
}

// Loose cloud of Gaussians around a center (brows, mouth corners).
void add_cloud(GaussianSet& set, Rng& rng, Vec3f center, Vec3f spread, int count, Vec3f color,
               Vec3f scale, float opacity) {
  for (int i = 0; i < count; ++i) {
    Gaussian3DT<float> g;
    g.position = {center.x + spread.x * float(rng.uniform(-1, 1)),
                  center.y + spread.y * float(rng.uniform(-1, 1)),
                  center.z + spread.z * float(rng.uniform(-1, 1))};
    g.rotation = {1, 0, 0, 0};
    g.scale = scale;
    g.color = color;
    g.opacity = opacity;
    set.push(g, -1);
  }
}

// z of the ellipsoid front surface at (x, y), with a floor to stay defined.
float front_z(const Vec3f& center, const Vec3f& semi, float x, float y) {
  const float qx = (x - center.x) / semi.x;
  const float qy = (y - center.y) / semi.y;
  return center.z + semi.z * std::sqrt(std::max(0.05f, 1.0f - qx * qx - qy * qy));
}

}  // namespace

ProceduralHead make_head(uint64_t identity_seed) {
  ProceduralHead head;
  head.identity_seed = identity_seed;
  Rng rng = Rng::stream(identity_seed, 0x4EAD);

  auto jit = [&rng](double lo, double hi) { return float(rng.uniform(lo, hi)); };

  const float skin_u = float(rng.uniform());
  Vec3f skin = lerp3({0.88f, 0.72f, 0.60f}, {0.48f, 0.34f, 0.25f}, skin_u);
  skin = {std::clamp(skin.x + jit(-0.03, 0.03), 0.05f, 0.95f),
          std::clamp(skin.y + jit(-0.03, 0.03), 0.05f, 0.95f),
          std::clamp(skin.z + jit(-0.03, 0.03), 0.05f, 0.95f)};
  const Vec3f hair_palette[4] = {
      {0.09f, 0.07f, 0.06f}, {0.30f, 0.19f, 0.10f}, {0.66f, 0.55f, 0.32f}, {0.55f, 0.55f, 0.56f}};
  Vec3f hair = hair_palette[rng.uniform_int(4)];
  hair = {hair.x + jit(-0.04, 0.04), hair.y + jit(-0.04, 0.04), hair.z + jit(-0.04, 0.04)};
  const Vec3f iris{0.12f + 0.38f * float(rng.uniform()), 0.15f + 0.30f * float(rng.uniform()),
                   0.10f + 0.28f * float(rng.uniform())};

  const Vec3f cr_center{0, 0.05f, 0};
  const Vec3f cr_semi{0.36f * jit(0.92, 1.08), 0.44f * jit(0.92, 1.08), 0.385f * jit(0.92, 1.08)};

  auto begin_part = [&](const char* name, Vec3f center) {
    RigPart part;
    part.name = name;
    part.center = center;
    part.first = head.neutral.size();
    return part;
  };
  auto end_part = [&](RigPart part) {
    part.count = head.neutral.size() - part.first;
    head.parts.push_back(part);
  };

  {  // cranium, minus the lower-front region the jaw owns
    RigPart p = begin_part("cranium", cr_center);
    add_shell(head.neutral, rng,
              {cr_center, cr_semi, 700, skin, 0.045f, 0.88f + jit(0, 0.06), 1.0f, 0.38f},
              [](const Vec3f& u) { return !(u.y < -0.45f && u.z > 0.05f); });
    end_part(p);
  }
  {  // jaw wedge: translates down and back as component 0 opens
    const Vec3f c{0, -0.26f, 0.10f};
    RigPart p = begin_part("jaw", c);
    const float travel = 0.085f * jit(0.9, 1.1);
    p.trans_coeff[1][0] = -travel;
    p.trans_coeff[2][0] = -0.03f;
    add_shell(head.neutral, rng,
              {c,
               {0.21f * jit(0.92, 1.08), 0.13f * jit(0.92, 1.08), 0.17f * jit(0.92, 1.08)},
               170,
               {skin.x * 0.93f, skin.y * 0.93f, skin.z * 0.93f},
               0.035f,
               0.9f,
               1.0f,
               0.38f});
    end_part(p);
  }
  for (int side = 0; side < 2; ++side) {  // eyes: blink squashes vertically
    const float sx = side == 0 ? -1.0f : 1.0f;
    const float ex = sx * 0.145f * jit(0.95, 1.05);
    const float ey = 0.13f * jit(0.95, 1.05);
    const Vec3f c{ex, ey, front_z(cr_center, cr_semi, ex, ey) - 0.005f};
    RigPart p = begin_part(side == 0 ? "eye_l" : "eye_r", c);
    p.scale_coeff[1][1] = -0.7f;
    p.trans_coeff[1][1] = -0.008f;
    add_shell(head.neutral, rng,
              {c, {0.055f, 0.055f, 0.05f}, 36, {0.92f, 0.90f, 0.88f}, 0.015f, 0.93f, 1.0f, 0.4f});
    Gaussian3DT<float> pupil;
    pupil.position = {c.x, c.y, c.z + 0.048f};
    pupil.scale = {0.021f, 0.021f, 0.007f};
    pupil.rotation = {1, 0, 0, 0};
    pupil.color = iris;
    pupil.opacity = 0.96f;
    head.neutral.push(pupil, -1);
    end_part(p);
  }
  {  // nose
    const Vec3f c{0, 0.01f, front_z(cr_center, cr_semi, 0, 0.01f) + 0.035f};
    RigPart p = begin_part("nose", c);
    add_shell(head.neutral, rng,
              {c,
               {0.055f * jit(0.9, 1.12), 0.08f * jit(0.9, 1.12), 0.07f * jit(0.9, 1.12)},
               26,
               {skin.x * 0.97f, skin.y * 0.95f, skin.z * 0.95f},
               0.02f,
               0.92f,
               1.0f,
               0.45f});
    end_part(p);
  }
  {  // lips follow the jaw at half travel
    const Vec3f c{0, -0.165f, front_z(cr_center, cr_semi, 0, -0.165f) + 0.005f};
    RigPart p = begin_part("lips", c);
    p.trans_coeff[1][0] = -0.05f;
    p.trans_coeff[2][0] = -0.012f;
    const Vec3f lip_color{0.58f + jit(-0.05, 0.08), 0.28f + jit(-0.04, 0.05),
                          0.28f + jit(-0.04, 0.05)};
    add_shell(head.neutral, rng,
              {c, {0.095f, 0.032f, 0.028f}, 46, lip_color, 0.02f, 0.94f, 1.0f, 0.5f});
    end_part(p);
  }
  for (int side = 0; side < 2; ++side) {  // mouth corners, components 2 and 3
    const float sx = side == 0 ? -1.0f : 1.0f;
    const float mx = sx * 0.105f;
    const Vec3f c{mx, -0.165f, front_z(cr_center, cr_semi, mx, -0.165f) + 0.004f};
    RigPart p = begin_part(side == 0 ? "mouth_corner_l" : "mouth_corner_r", c);
    p.trans_coeff[1][2 + side] = 0.07f * jit(0.9, 1.1);
    p.trans_coeff[2][2 + side] = 0.008f;
    add_cloud(head.neutral, rng, c, {0.018f, 0.012f, 0.008f}, 8,
              {0.55f, 0.27f, 0.27f}, {0.020f, 0.016f, 0.012f}, 0.94f);
    end_part(p);
  }
  for (int side = 0; side < 2; ++side) {  // brows, component 4
    const float sx = side == 0 ? -1.0f : 1.0f;
    const float bx = sx * 0.135f;
    const float by = 0.245f;
    const Vec3f c{bx, by, front_z(cr_center, cr_semi, bx, by) + 0.003f};
    RigPart p = begin_part(side == 0 ? "brow_l" : "brow_r", c);
    p.trans_coeff[1][4] = 0.055f * jit(0.9, 1.1);
    add_cloud(head.neutral, rng, c, {0.05f, 0.008f, 0.006f}, 12, {0.13f, 0.10f, 0.08f},
              {0.034f, 0.011f, 0.011f}, 0.95f);
    end_part(p);
  }
  {  // hair cap on the scaled cranium shell (top and back)
    RigPart p = begin_part("hair", cr_center);
    const Vec3f semi{cr_semi.x * 1.055f, cr_semi.y * 1.055f, cr_semi.z * 1.055f};
    const float y_cut = 0.50f + jit(-0.08, 0.12);
    add_shell(head.neutral, rng, {cr_center, semi, 380, hair, 0.05f, 0.93f, 1.35f, 0.30f},
              [y_cut](const Vec3f& u) { return u.y > y_cut || u.z < -0.35f; });
    end_part(p);
  }
  return head;
}

GaussianSet pose_head(const ProceduralHead& head, const std::vector<float>& e,
                      int64_t* clamp_warnings) {
  if (e.size() != kExprDim) throw std::invalid_argument("pose_head: expression dimension mismatch");
  std::vector<float> ec(e);
  for (auto& v : ec) {
    if (v < -1.0f || v > 1.0f) {
      if (clamp_warnings) ++*clamp_warnings;
      v = std::clamp(v, -1.0f, 1.0f);
    }
  }
  GaussianSet posed = head.neutral;
  for (const RigPart& part : head.parts) {
    float mult[3] = {1, 1, 1};
    float trans[3] = {0, 0, 0};
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < kExprDim; ++k) {
        mult[r] += part.scale_coeff[r][k] * ec[k];
        trans[r] += part.trans_coeff[r][k] * ec[k];
      }
    for (size_t i = part.first; i < part.first + part.count; ++i) {
      Vec3f& p = posed.positions[i];
      p = {part.center.x + mult[0] * (p.x - part.center.x) + trans[0],
           part.center.y + mult[1] * (p.y - part.center.y) + trans[1],
           part.center.z + mult[2] * (p.z - part.center.z) + trans[2]};
      Vec3f& s = posed.scales[i];
      s = {s.x * std::max(0.05f, mult[0]), s.y * std::max(0.05f, mult[1]),
           s.z * std::max(0.05f, mult[2])};
    }
  }
  return posed;
}

std::vector<Cameraf> build_camera_pool(const CameraRingSpec& spec) {
  std::vector<Cameraf> pool;
  const int per_ring = spec.count / 2;
  const float f = 0.5f * spec.width / std::tan(float(spec.fov_deg * kPi / 360.0));
  for (int ring = 0; ring < 2; ++ring) {
    const double lat = (ring == 0 ? spec.lat_deg_low : spec.lat_deg_high) * kPi / 180.0;
    const int n = ring == 0 ? per_ring : spec.count - per_ring;
    for (int i = 0; i < n; ++i) {
      const double az = n == 1 ? 0.0
                               : (-spec.azimuth_deg + 2.0 * spec.azimuth_deg * i / (n - 1)) *
                                     kPi / 180.0;
      const Vec3f eye{float(spec.radius * std::sin(az) * std::cos(lat)),
                      float(spec.radius * std::sin(lat)),
                      float(spec.radius * std::cos(az) * std::cos(lat))};
      pool.push_back(Cameraf::look_at(eye, {0, 0, 0}, {0, 1, 0}, f, f, spec.width * 0.5f,
                                      spec.height * 0.5f, spec.width, spec.height));
    }
  }
  return pool;
}

std::vector<int> input_eligible_cameras(const CameraRingSpec& spec) {
  std::vector<int> eligible;
  const int per_ring = spec.count / 2;
  for (int ring = 0; ring < 2; ++ring) {
    const int n = ring == 0 ? per_ring : spec.count - per_ring;
    for (int i = 0; i < n; ++i) {
      const double az = n == 1 ? 0.0 : -spec.azimuth_deg + 2.0 * spec.azimuth_deg * i / (n - 1);
      if (std::abs(az) <= spec.input_azimuth_deg)
        eligible.push_back(ring == 0 ? i : per_ring + i);
    }
  }
  return eligible;
}

namespace {
double angular_distance(const Cameraf& a, const Cameraf& b) {
  const Vec3f da = a.origin().normalized();
  const Vec3f db = b.origin().normalized();
  return std::acos(std::clamp(double(da.dot(db)), -1.0, 1.0));
}
}  // namespace

std::vector<int> sample_viewpoints(const std::vector<Cameraf>& pool,
                                   const std::vector<int>& eligible, int v, int candidate_k,
                                   Rng& rng) {
  if (static_cast<int>(eligible.size()) < candidate_k)
    throw std::invalid_argument("sample_viewpoints: pool smaller than candidate_k");
  if (v > candidate_k) throw std::invalid_argument("sample_viewpoints: v > candidate_k");

  std::vector<int> candidates;
  candidates.push_back(eligible[rng.uniform_int(static_cast<int64_t>(eligible.size()))]);
  while (static_cast<int>(candidates.size()) < candidate_k) {
    int best = -1;
    double best_d = -1.0;
    for (int idx : eligible) {
      if (std::find(candidates.begin(), candidates.end(), idx) != candidates.end()) continue;
      double d = 1e30;
      for (int c : candidates) d = std::min(d, angular_distance(pool[idx], pool[c]));
      if (d > best_d) {  // ties keep the earlier (lower) index
        best_d = d;
        best = idx;
      }
    }
    candidates.push_back(best);
  }
  // Uniformly choose v of the candidates (partial Fisher-Yates).
  std::vector<int> picks = candidates;
  for (int i = 0; i < v; ++i) {
    const int64_t j = i + rng.uniform_int(static_cast<int64_t>(picks.size()) - i);
    std::swap(picks[i], picks[j]);
  }
  picks.resize(v);
  return picks;
}

RenderOutputT<float> render_ground_truth(const ProceduralHead& head, const std::vector<float>& e,
                                         const Cameraf& camera) {
  const GaussianSet posed = pose_head(head, e);
  return rasterize(posed, camera, Vec3f{0, 0, 0});
}

namespace {

// World points from the expected-depth buffer; returns false on background.
bool backproject(const RenderOutputT<float>& out, const Cameraf& cam, int x, int y, Vec3f& world) {
  const size_t pix = static_cast<size_t>(y) * out.width + x;
  if (!(out.alpha[pix] > 0)) return false;
  const float z = out.depth[pix];
  const Vec3f pc{(float(x) + 0.5f - cam.cx) / cam.fx * z, (float(y) + 0.5f - cam.cy) / cam.fy * z,
                 z};
  const Mat3T<float> rt = quat_to_rotmat(cam.rotation).transposed();
  world = rt * (pc - cam.translation);
  return true;
}

}  // namespace

void synth_position_map(const ProceduralHead& head, const std::vector<float>& e,
                        const Cameraf& camera, double sigma_pos, Rng& rng,
                        std::vector<float>& positions, std::vector<float>& confidence) {
  const RenderOutputT<float> out = render_ground_truth(head, e, camera);
  const size_t px = out.pixels();
  positions.assign(px * 3, 0.0f);
  confidence.assign(px, 0.0f);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      const size_t pix = static_cast<size_t>(y) * out.width + x;
      confidence[pix] = std::clamp(out.alpha[pix], 0.0f, 1.0f);
      Vec3f w;
      if (!backproject(out, camera, x, y, w)) continue;
      if (sigma_pos > 0) {
        w.x += float(sigma_pos * rng.normal());
        w.y += float(sigma_pos * rng.normal());
        w.z += float(sigma_pos * rng.normal());
      }
      positions[pix * 3 + 0] = w.x;
      positions[pix * 3 + 1] = w.y;
      positions[pix * 3 + 2] = w.z;
    }
}

std::vector<float> synth_feature_map(const ProceduralHead& head, const std::vector<float>& e,
                                     const Cameraf& camera) {
  const Cameraf fcam = camera.scaled(camera.width / kFeatScale, camera.height / kFeatScale);
  const RenderOutputT<float> out = render_ground_truth(head, e, fcam);
  const int w = fcam.width, h = fcam.height;
  std::vector<float> feat(static_cast<size_t>(w) * h * kFeatChannels, 0.0f);
  const Vec3f cam_origin = fcam.origin();
  const float dist = cam_origin.norm();

  std::vector<Vec3f> world(static_cast<size_t>(w) * h);
  std::vector<uint8_t> fg(static_cast<size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t pix = static_cast<size_t>(y) * w + x;
      Vec3f p;
      if (out.alpha[pix] > 0.5f && backproject(out, fcam, x, y, p)) {
        world[pix] = p;
        fg[pix] = 1;
      }
    }

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t pix = static_cast<size_t>(y) * w + x;
      if (!fg[pix]) continue;
      float* f = feat.data() + pix * kFeatChannels;
      const Vec3f p = world[pix];
      auto at = [&](int xx, int yy) {
        xx = std::clamp(xx, 0, w - 1);
        yy = std::clamp(yy, 0, h - 1);
        const size_t q = static_cast<size_t>(yy) * w + xx;
        return fg[q] ? world[q] : p;
      };
      Vec3f n = (at(x + 1, y) - at(x - 1, y)).cross(at(x, y + 1) - at(x, y - 1));
      if (n.norm() < 1e-9f) n = (cam_origin - p);
      n = n.normalized();
      if (n.dot(cam_origin - p) < 0) n = {-n.x, -n.y, -n.z};
      f[0] = n.x;
      f[1] = n.y;
      f[2] = n.z;
      f[3] = p.x;
      f[4] = p.y;
      f[5] = p.z;
      const float zc = out.depth[pix] - dist;
      f[6] = zc;
      auto depth_at = [&](int xx, int yy) {
        xx = std::clamp(xx, 0, w - 1);
        yy = std::clamp(yy, 0, h - 1);
        const size_t q = static_cast<size_t>(yy) * w + xx;
        return fg[q] ? out.depth[q] : out.depth[pix];
      };
      f[7] = depth_at(x + 1, y) + depth_at(x - 1, y) + depth_at(x, y + 1) + depth_at(x, y - 1) -
             4.0f * out.depth[pix];
      f[8] = 1.0f;
      // f[9..11] reserved, zero
    }
  return feat;
}

// ---------------------------------------------------------------------------

DatasetGenerator::DatasetGenerator(const GenConfig& cfg) : cfg_(cfg) {
  if (cfg_.identities < 1) throw std::invalid_argument("gen: identities must be >= 1");
  if (cfg_.expressions < 1 || cfg_.heldout_expressions < 0 ||
      cfg_.heldout_expressions >= cfg_.expressions)
    throw std::invalid_argument("gen: bad expression pool split");
  if (cfg_.input_size % kFeatScale != 0)
    throw std::invalid_argument("gen: input size must divide by the feature scale");
  cfg_.ring.width = cfg_.ring.height = cfg_.input_size;

  for (int i = 0; i < cfg_.identities; ++i) {
    Rng r = Rng::stream(cfg_.seed, 0x1D000000ULL + uint64_t(i));
    heads_.push_back(make_head(r.next_u64()));
  }
  pool_ = build_camera_pool(cfg_.ring);
  const std::vector<int> eligible = input_eligible_cameras(cfg_.ring);
  auto held = [&](int idx) {
    return std::find(cfg_.heldout_cameras.begin(), cfg_.heldout_cameras.end(), idx) !=
           cfg_.heldout_cameras.end();
  };
  for (int idx : eligible)
    if (!held(idx)) input_eligible_.push_back(idx);
  for (int idx = 0; idx < static_cast<int>(pool_.size()); ++idx)
    if (!held(idx)) sup_pool_.push_back(idx);

  // Expression pool: farthest-point sampling over the active rig components
  // keeps the pool expressions mutually distinct.
  Rng er = Rng::stream(cfg_.seed, 0xE4B);
  std::vector<std::vector<float>> candidates;
  for (int i = 0; i < 512; ++i) {
    std::vector<float> e(kExprDim, 0.0f);
    for (int k = 0; k < kActiveExprDims; ++k) e[k] = float(er.uniform(-1, 1));
    candidates.push_back(std::move(e));
  }
  auto dist2 = [](const std::vector<float>& a, const std::vector<float>& b) {
    double acc = 0;
    for (size_t k = 0; k < a.size(); ++k) acc += double(a[k] - b[k]) * double(a[k] - b[k]);
    return acc;
  };
  expr_pool_.push_back(candidates[0]);
  while (static_cast<int>(expr_pool_.size()) < cfg_.expressions) {
    size_t best = 0;
    double best_d = -1;
    for (size_t i = 0; i < candidates.size(); ++i) {
      double d = 1e30;
      for (const auto& p : expr_pool_) d = std::min(d, dist2(candidates[i], p));
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    expr_pool_.push_back(candidates[best]);
  }
}

void DatasetGenerator::fill_view(const ProceduralHead& head, const std::vector<float>& e,
                                 int pool_camera, Rng& rng, InputBundle& bundle, int slot) const {
  const Cameraf& cam = pool_[pool_camera];
  const size_t px = static_cast<size_t>(cfg_.input_size) * cfg_.input_size;
  const RenderOutputT<float> out = render_ground_truth(head, e, cam);
  std::copy(out.image.begin(), out.image.end(), bundle.images.begin() + slot * px * 3);
  for (size_t i = 0; i < px; ++i)
    bundle.confidence[slot * px + i] = std::clamp(out.alpha[i], 0.0f, 1.0f);
  for (int y = 0; y < cfg_.input_size; ++y)
    for (int x = 0; x < cfg_.input_size; ++x) {
      const size_t pix = static_cast<size_t>(y) * cfg_.input_size + x;
      Vec3f w{0, 0, 0};
      if (backproject(out, cam, x, y, w) && cfg_.sigma_pos > 0) {
        w.x += float(cfg_.sigma_pos * rng.normal());
        w.y += float(cfg_.sigma_pos * rng.normal());
        w.z += float(cfg_.sigma_pos * rng.normal());
      }
      bundle.positions[(slot * px + pix) * 3 + 0] = w.x;
      bundle.positions[(slot * px + pix) * 3 + 1] = w.y;
      bundle.positions[(slot * px + pix) * 3 + 2] = w.z;
    }
  const std::vector<float> feat = synth_feature_map(head, e, cam);
  std::copy(feat.begin(), feat.end(),
            bundle.features.begin() + static_cast<size_t>(slot) * feat.size());
  bundle.cameras[slot] = cam;
}

SceneSample DatasetGenerator::make_sample(uint64_t stream_salt, int64_t index, bool eval,
                                          bool inconsistent) const {
  Rng rng = Rng::stream(cfg_.seed, stream_salt * 0x9E3779B97F4A7C15ULL + uint64_t(index));
  SceneSample s;
  s.index = index;
  s.identity = index % cfg_.identities;
  const ProceduralHead& head = heads_[static_cast<size_t>(s.identity)];

  const int n_train = train_expression_count();
  if (eval && cfg_.heldout_expressions > 0)
    s.target_expr_index = n_train + int(rng.uniform_int(cfg_.heldout_expressions));
  else
    s.target_expr_index = int(rng.uniform_int(n_train));
  s.target_expr = expr_pool_[static_cast<size_t>(s.target_expr_index)];

  std::vector<int> in_cams =
      sample_viewpoints(pool_, input_eligible_, cfg_.views, cfg_.candidate_k, rng);
  s.input_camera_ids.assign(in_cams.begin(), in_cams.end());

  // Input expression policy: with probability p_inc (always, for the
  // inconsistent evaluation protocol) a view is rendered at a random
  // non-target expression from the train pool.
  for (int v = 0; v < cfg_.views; ++v) {
    bool off_target = inconsistent;
    if (!off_target && !eval && cfg_.p_inc > 0) off_target = rng.uniform() < cfg_.p_inc;
    if (off_target) {
      int j;
      if (s.target_expr_index < n_train) {
        j = int(rng.uniform_int(n_train - 1));
        if (j >= s.target_expr_index) ++j;
      } else {
        j = int(rng.uniform_int(n_train));
      }
      s.input_exprs.push_back(expr_pool_[static_cast<size_t>(j)]);
    } else {
      s.input_exprs.push_back(s.target_expr);
    }
  }

  if (eval) {
    s.sup_camera_ids.assign(cfg_.heldout_cameras.begin(), cfg_.heldout_cameras.end());
  } else {
    std::vector<int> picks = sup_pool_;
    const int n_sup = std::min<int>(cfg_.sup_views, int(picks.size()));
    for (int i = 0; i < n_sup; ++i) {
      const int64_t j = i + rng.uniform_int(static_cast<int64_t>(picks.size()) - i);
      std::swap(picks[i], picks[j]);
    }
    s.sup_camera_ids.assign(picks.begin(), picks.begin() + n_sup);
  }

  InputBundle& b = s.bundle;
  b.views = cfg_.views;
  b.height = b.width = cfg_.input_size;
  b.feat_h = b.feat_w = cfg_.input_size / kFeatScale;
  b.feat_dim = kFeatChannels;
  const size_t px = static_cast<size_t>(cfg_.input_size) * cfg_.input_size;
  b.images.assign(px * 3 * cfg_.views, 0.0f);
  b.positions.assign(px * 3 * cfg_.views, 0.0f);
  b.confidence.assign(px * cfg_.views, 0.0f);
  b.features.assign(static_cast<size_t>(b.feat_h) * b.feat_w * kFeatChannels * cfg_.views, 0.0f);
  b.cameras.resize(cfg_.views);
  for (int v = 0; v < cfg_.views; ++v) fill_view(head, s.input_exprs[v], in_cams[v], rng, b, v);
  b.compute_plucker();

  s.sup_width = s.sup_height = cfg_.sup_size;
  for (int32_t cam_id : s.sup_camera_ids) {
    const Cameraf sup_cam = pool_[cam_id].scaled(cfg_.sup_size, cfg_.sup_size);
    s.sup_cameras.push_back(sup_cam);
    s.sup_images.push_back(render_ground_truth(head, s.target_expr, sup_cam).image);
  }
  return s;
}

SceneSample DatasetGenerator::train_sample(int64_t index) const {
  return make_sample(0x51ULL, index, /*eval=*/false, /*inconsistent=*/false);
}

SceneSample DatasetGenerator::eval_sample(int64_t index, bool inconsistent_inputs) const {
  return make_sample(inconsistent_inputs ? 0x53ULL : 0x52ULL, index, /*eval=*/true,
                     inconsistent_inputs);
}

}  // namespace gsa
