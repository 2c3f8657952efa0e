#include "gsavatar/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gsavatar/parallel.hpp"

namespace gsa {
namespace {

// Per-splat data packed for the compositing loops, stored in global depth
// order (key: camera-space z, then input index).
template <typename Real>
struct PackedSplat {
  Real mx, my;      // mean2d in pixels
  Real ca, cb, cc;  // conic = inverse 2D covariance: xx, xy, yy
  Real opacity;
  Real ln_cut;      // alpha < cutoff  <=>  sigma > ln(opacity * 255)
  Real r, g, b;
  Real depth;
  int32_t id;  // index into the input set
};

// Pre-filter margin: sigma > ln_cut + kSigmaMargin guarantees alpha < cutoff,
// so the exponential is only evaluated for candidate contributors.
constexpr double kSigmaMargin = 1e-3;

template <typename Real>
struct FramePrep {
  int tiles_x = 0, tiles_y = 0;
  std::vector<PackedSplat<Real>> splats;
  std::vector<int32_t> tile_offsets;  // CSR over tiles, size tiles_x*tiles_y+1
  std::vector<int32_t> tile_items;    // indices into splats, depth order per tile
};

template <typename Real>
void tile_span(const PackedSplat<Real>& s, Real radius, int tiles_x, int tiles_y, int& x0, int& x1,
               int& y0, int& y1) {
  const int ts = RasterParams::kTileSize;
  x0 = std::clamp(static_cast<int>(std::floor((s.mx - radius) / ts)), 0, tiles_x - 1);
  x1 = std::clamp(static_cast<int>(std::floor((s.mx + radius) / ts)), 0, tiles_x - 1);
  y0 = std::clamp(static_cast<int>(std::floor((s.my - radius) / ts)), 0, tiles_y - 1);
  y1 = std::clamp(static_cast<int>(std::floor((s.my + radius) / ts)), 0, tiles_y - 1);
}

template <typename Real>
FramePrep<Real> prepare_frame(const GaussianSetT<Real>& set, const CameraT<Real>& camera,
                              std::vector<Real>* radius_out) {
  const int64_t n = static_cast<int64_t>(set.size());
  FramePrep<Real> prep;
  prep.tiles_x = (camera.width + RasterParams::kTileSize - 1) / RasterParams::kTileSize;
  prep.tiles_y = (camera.height + RasterParams::kTileSize - 1) / RasterParams::kTileSize;

  std::vector<PackedSplat<Real>> unsorted(n);
  std::vector<Real> radius(n, Real(0));
  std::vector<uint8_t> keep(n, 0);
  parallel_for(n, [&](int64_t b, int64_t e) {
    for (int64_t i = b; i < e; ++i) {
      const Gaussian3DT<Real> g = set.get(static_cast<size_t>(i));
      if (!(g.opacity >= Real(RasterParams::kAlphaCutoff))) continue;
      const Projected2DT<Real> p = project_gaussian(g, camera);
      if (p.culled) continue;
      const Real det = p.cov_xx * p.cov_yy - p.cov_xy * p.cov_xy;
      if (!(det > Real(0))) continue;
      const Real mid = Real(0.5) * (p.cov_xx + p.cov_yy);
      const Real lam_max = mid + std::sqrt(std::max(Real(0), mid * mid - det));
      const Real rad = std::ceil(Real(RasterParams::kGatherRadiusSigma) * std::sqrt(lam_max));
      if (p.mean2d.x + rad < 0 || p.mean2d.x - rad > Real(camera.width) || p.mean2d.y + rad < 0 ||
          p.mean2d.y - rad > Real(camera.height))
        continue;
      PackedSplat<Real>& s = unsorted[i];
      s.mx = p.mean2d.x;
      s.my = p.mean2d.y;
      const Real inv_det = Real(1) / det;
      s.ca = p.cov_yy * inv_det;
      s.cb = -p.cov_xy * inv_det;
      s.cc = p.cov_xx * inv_det;
      s.opacity = g.opacity;
      s.ln_cut = std::log(g.opacity * Real(255));
      s.r = g.color.x;
      s.g = g.color.y;
      s.b = g.color.z;
      s.depth = p.depth;
      s.id = static_cast<int32_t>(i);
      radius[i] = rad;
      keep[i] = 1;
    }
  });

  std::vector<int32_t> order;
  order.reserve(n);
  for (int64_t i = 0; i < n; ++i)
    if (keep[i]) order.push_back(static_cast<int32_t>(i));
  std::sort(order.begin(), order.end(), [&](int32_t a, int32_t b) {
    if (unsorted[a].depth != unsorted[b].depth) return unsorted[a].depth < unsorted[b].depth;
    return a < b;
  });

  prep.splats.resize(order.size());
  for (size_t k = 0; k < order.size(); ++k) prep.splats[k] = unsorted[order[k]];

  // CSR binning; the fill pass walks splats in depth order, so every tile list
  // is depth-sorted by construction.
  const int tiles = prep.tiles_x * prep.tiles_y;
  std::vector<int32_t> counts(tiles, 0);
  for (const auto& s : prep.splats) {
    int x0, x1, y0, y1;
    tile_span(s, radius[s.id], prep.tiles_x, prep.tiles_y, x0, x1, y0, y1);
    for (int ty = y0; ty <= y1; ++ty)
      for (int tx = x0; tx <= x1; ++tx) ++counts[ty * prep.tiles_x + tx];
  }
  prep.tile_offsets.assign(tiles + 1, 0);
  for (int t = 0; t < tiles; ++t) prep.tile_offsets[t + 1] = prep.tile_offsets[t] + counts[t];
  prep.tile_items.resize(prep.tile_offsets.back());
  std::vector<int32_t> cursor(prep.tile_offsets.begin(), prep.tile_offsets.end() - 1);
  for (size_t k = 0; k < prep.splats.size(); ++k) {
    const auto& s = prep.splats[k];
    int x0, x1, y0, y1;
    tile_span(s, radius[s.id], prep.tiles_x, prep.tiles_y, x0, x1, y0, y1);
    for (int ty = y0; ty <= y1; ++ty)
      for (int tx = x0; tx <= x1; ++tx)
        prep.tile_items[cursor[ty * prep.tiles_x + tx]++] = static_cast<int32_t>(k);
  }
  if (radius_out) *radius_out = std::move(radius);
  return prep;
}

template <typename Real>
RenderOutputT<Real> make_output(const CameraT<Real>& camera) {
  RenderOutputT<Real> out;
  out.width = camera.width;
  out.height = camera.height;
  const size_t px = out.pixels();
  out.image.assign(px * 3, Real(0));
  out.alpha.assign(px, Real(0));
  out.transmittance.assign(px, Real(1));
  out.contrib_count.assign(px, 0);
  out.depth.assign(px, Real(0));
  return out;
}

}  // namespace

template <typename Real>
RenderOutputT<Real> rasterize(const GaussianSetT<Real>& set, const CameraT<Real>& camera,
                              const Vec3T<Real>& background) {
  set.validate();
  camera.validate();
  RenderOutputT<Real> out = make_output(camera);
  const FramePrep<Real> prep = prepare_frame<Real>(set, camera, nullptr);

  const Real cutoff = Real(RasterParams::kAlphaCutoff);
  const Real t_stop = Real(RasterParams::kTransmittanceStop);
  const Real margin = Real(kSigmaMargin);
  const int tiles = prep.tiles_x * prep.tiles_y;

  parallel_for(tiles, [&](int64_t tb, int64_t te) {
    for (int64_t tile = tb; tile < te; ++tile) {
      const int tx = static_cast<int>(tile) % prep.tiles_x;
      const int ty = static_cast<int>(tile) / prep.tiles_x;
      const int32_t begin = prep.tile_offsets[tile];
      const int32_t end = prep.tile_offsets[tile + 1];
      const int px0 = tx * RasterParams::kTileSize;
      const int py0 = ty * RasterParams::kTileSize;
      const int px1 = std::min(px0 + RasterParams::kTileSize, camera.width);
      const int py1 = std::min(py0 + RasterParams::kTileSize, camera.height);
      for (int y = py0; y < py1; ++y) {
        for (int x = px0; x < px1; ++x) {
          const Real px = Real(x) + Real(0.5);
          const Real py = Real(y) + Real(0.5);
          Real t = Real(1);
          Real cr = 0, cg = 0, cb = 0, dep = 0;
          int32_t cnt = 0;
          for (int32_t it = begin; it < end; ++it) {
            const PackedSplat<Real>& s = prep.splats[prep.tile_items[it]];
            const Real dx = px - s.mx;
            const Real dy = py - s.my;
            const Real sigma = Real(0.5) * (s.ca * dx * dx + s.cc * dy * dy) + s.cb * dx * dy;
            if (sigma < Real(0) || sigma > s.ln_cut + margin) continue;
            const Real alpha = s.opacity * std::exp(-sigma);
            if (alpha < cutoff) continue;
            const Real w = alpha * t;
            cr += s.r * w;
            cg += s.g * w;
            cb += s.b * w;
            dep += s.depth * w;
            ++cnt;
            t *= Real(1) - alpha;
            // Composite-then-stop: this contribution is kept; anything deeper
            // can add at most t < the stop threshold.
            if (t < t_stop) break;
          }
          const size_t pix = static_cast<size_t>(y) * camera.width + x;
          out.image[pix * 3 + 0] = cr + t * background.x;
          out.image[pix * 3 + 1] = cg + t * background.y;
          out.image[pix * 3 + 2] = cb + t * background.z;
          const Real a = Real(1) - t;
          out.alpha[pix] = a;
          out.transmittance[pix] = t;
          out.contrib_count[pix] = cnt;
          out.depth[pix] = a > Real(0) ? dep / a : Real(0);
        }
      }
    }
  });
  return out;
}

template <typename Real>
RenderOutputT<Real> reference_rasterize(const GaussianSetT<Real>& set, const CameraT<Real>& camera,
                                        const Vec3T<Real>& background) {
  set.validate();
  camera.validate();
  RenderOutputT<Real> out = make_output(camera);

  // Project and depth-sort exactly like the tile path, then composite every
  // splat at every pixel in double precision without cutoffs.
  const int64_t n = static_cast<int64_t>(set.size());
  struct RefSplat {
    double mx, my, ca, cb, cc, opacity, r, g, b, depth;
    int32_t id;
  };
  std::vector<RefSplat> splats;
  splats.reserve(n);
  for (int64_t i = 0; i < n; ++i) {
    const Gaussian3DT<Real> g = set.get(static_cast<size_t>(i));
    const Projected2DT<Real> p = project_gaussian(g, camera);
    if (p.culled) continue;
    const double cov_xx = p.cov_xx, cov_xy = p.cov_xy, cov_yy = p.cov_yy;
    const double det = cov_xx * cov_yy - cov_xy * cov_xy;
    if (!(det > 0)) continue;
    splats.push_back({double(p.mean2d.x), double(p.mean2d.y), cov_yy / det, -cov_xy / det,
                      cov_xx / det, double(g.opacity), double(g.color.x), double(g.color.y),
                      double(g.color.z), double(p.depth), static_cast<int32_t>(i)});
  }
  std::stable_sort(splats.begin(), splats.end(), [](const RefSplat& a, const RefSplat& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.id < b.id;
  });

  parallel_for(camera.height, [&](int64_t yb, int64_t ye) {
    for (int64_t y = yb; y < ye; ++y) {
      for (int x = 0; x < camera.width; ++x) {
        const double px = double(x) + 0.5;
        const double py = double(y) + 0.5;
        double t = 1.0, cr = 0, cg = 0, cb = 0, dep = 0;
        int32_t cnt = 0;
        for (const RefSplat& s : splats) {
          const double dx = px - s.mx;
          const double dy = py - s.my;
          const double sigma = 0.5 * (s.ca * dx * dx + s.cc * dy * dy) + s.cb * dx * dy;
          if (sigma < 0) continue;
          const double alpha = s.opacity * std::exp(-sigma);
          if (!(alpha > 0)) continue;
          const double w = alpha * t;
          cr += s.r * w;
          cg += s.g * w;
          cb += s.b * w;
          dep += s.depth * w;
          ++cnt;
          t *= 1.0 - alpha;
        }
        const size_t pix = static_cast<size_t>(y) * camera.width + x;
        out.image[pix * 3 + 0] = Real(cr + t * double(background.x));
        out.image[pix * 3 + 1] = Real(cg + t * double(background.y));
        out.image[pix * 3 + 2] = Real(cb + t * double(background.z));
        const double a = 1.0 - t;
        out.alpha[pix] = Real(a);
        out.transmittance[pix] = Real(t);
        out.contrib_count[pix] = cnt;
        out.depth[pix] = a > 0 ? Real(dep / a) : Real(0);
      }
    }
  });
  return out;
}

namespace {

// Partial derivatives of the (unit-quaternion) rotation matrix entries with
// respect to the quaternion components, evaluated at q = (w,x,y,z).
template <typename Real>
void rotmat_quat_jacobian(const QuatT<Real>& q, Real dR[4][3][3]) {
  const Real w = q.w, x = q.x, y = q.y, z = q.z;
  const Real table[4][3][3] = {
      {{0, -z, y}, {z, 0, -x}, {-y, x, 0}},
      {{0, y, z}, {y, -2 * x, -w}, {z, w, -2 * x}},
      {{-2 * y, x, w}, {x, 0, z}, {-w, z, -2 * y}},
      {{-2 * z, -w, x}, {w, -2 * z, y}, {x, y, 0}},
  };
  for (int k = 0; k < 4; ++k)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) dR[k][i][j] = 2 * table[k][i][j];
}

}  // namespace

template <typename Real>
GaussianGradientsT<Real> rasterize_backward(const GaussianSetT<Real>& set,
                                            const CameraT<Real>& camera,
                                            const Vec3T<Real>& background,
                                            const std::vector<Real>& d_image,
                                            const RenderOutputT<Real>& forward_out) {
  set.validate();
  camera.validate();
  if (forward_out.width != camera.width || forward_out.height != camera.height ||
      forward_out.transmittance.size() != forward_out.pixels() ||
      forward_out.contrib_count.size() != forward_out.pixels())
    throw std::invalid_argument("rasterize_backward: aux does not match this camera");
  if (d_image.size() != forward_out.pixels() * 3)
    throw std::invalid_argument("rasterize_backward: d_image size mismatch");

  GaussianGradientsT<Real> grads(set.size());
  const FramePrep<Real> prep = prepare_frame<Real>(set, camera, nullptr);
  const int tiles = prep.tiles_x * prep.tiles_y;
  const Real cutoff = Real(RasterParams::kAlphaCutoff);
  const Real t_stop = Real(RasterParams::kTransmittanceStop);
  const Real margin = Real(kSigmaMargin);

  // Phase A: per-tile local gradients (parallel, no shared writes).
  // Layout per tile item: dcol(3), dopacity, dmean(2), dconic(3).
  constexpr int kG = 9;
  std::vector<std::vector<Real>> tile_grads(tiles);
  std::vector<uint8_t> tile_aux_ok(tiles, 1);

  parallel_for(tiles, [&](int64_t tb, int64_t te) {
    struct Contrib {
      int32_t li;
      Real alpha, t_before;
    };
    std::vector<Contrib> stack;
    for (int64_t tile = tb; tile < te; ++tile) {
      const int32_t begin = prep.tile_offsets[tile];
      const int32_t end = prep.tile_offsets[tile + 1];
      if (begin == end) continue;
      auto& local = tile_grads[tile];
      local.assign(static_cast<size_t>(end - begin) * kG, Real(0));
      const int tx = static_cast<int>(tile) % prep.tiles_x;
      const int ty = static_cast<int>(tile) / prep.tiles_x;
      const int px0 = tx * RasterParams::kTileSize;
      const int py0 = ty * RasterParams::kTileSize;
      const int px1 = std::min(px0 + RasterParams::kTileSize, camera.width);
      const int py1 = std::min(py0 + RasterParams::kTileSize, camera.height);
      for (int y = py0; y < py1; ++y) {
        for (int x = px0; x < px1; ++x) {
          const Real px = Real(x) + Real(0.5);
          const Real py = Real(y) + Real(0.5);
          const size_t pix = static_cast<size_t>(y) * camera.width + x;
          // Re-walk the forward compositing to recover each contribution.
          stack.clear();
          Real t = Real(1);
          for (int32_t it = begin; it < end; ++it) {
            const PackedSplat<Real>& s = prep.splats[prep.tile_items[it]];
            const Real dx = px - s.mx;
            const Real dy = py - s.my;
            const Real sigma = Real(0.5) * (s.ca * dx * dx + s.cc * dy * dy) + s.cb * dx * dy;
            if (sigma < Real(0) || sigma > s.ln_cut + margin) continue;
            const Real alpha = s.opacity * std::exp(-sigma);
            if (alpha < cutoff) continue;
            stack.push_back({it - begin, alpha, t});
            t *= Real(1) - alpha;
            if (t < t_stop) break;
          }
          if (t != forward_out.transmittance[pix] ||
              static_cast<int32_t>(stack.size()) != forward_out.contrib_count[pix]) {
            tile_aux_ok[tile] = 0;
            continue;
          }
          const Real g0 = d_image[pix * 3 + 0];
          const Real g1 = d_image[pix * 3 + 1];
          const Real g2 = d_image[pix * 3 + 2];
          if (g0 == Real(0) && g1 == Real(0) && g2 == Real(0)) continue;
          // Back-to-front: c_behind is the color composited behind the
          // current splat (background included), which makes
          // d image / d alpha_i = T_i * (c_i - c_behind) division-free.
          Real cbr = background.x, cbg = background.y, cbb = background.z;
          for (size_t k = stack.size(); k-- > 0;) {
            const Contrib& c = stack[k];
            const PackedSplat<Real>& s = prep.splats[prep.tile_items[begin + c.li]];
            Real* acc = local.data() + static_cast<size_t>(c.li) * kG;
            const Real w = c.alpha * c.t_before;
            acc[0] += w * g0;
            acc[1] += w * g1;
            acc[2] += w * g2;
            const Real a_grad =
                c.t_before * ((s.r - cbr) * g0 + (s.g - cbg) * g1 + (s.b - cbb) * g2);
            acc[3] += (c.alpha / s.opacity) * a_grad;
            const Real s_grad = -c.alpha * a_grad;
            const Real dx = px - s.mx;
            const Real dy = py - s.my;
            acc[4] += -s_grad * (s.ca * dx + s.cb * dy);
            acc[5] += -s_grad * (s.cc * dy + s.cb * dx);
            acc[6] += Real(0.5) * dx * dx * s_grad;
            acc[7] += Real(0.5) * dx * dy * s_grad;
            acc[8] += Real(0.5) * dy * dy * s_grad;
            cbr = c.alpha * s.r + (Real(1) - c.alpha) * cbr;
            cbg = c.alpha * s.g + (Real(1) - c.alpha) * cbg;
            cbb = c.alpha * s.b + (Real(1) - c.alpha) * cbb;
          }
        }
      }
    }
  });

  for (int t = 0; t < tiles; ++t)
    if (!tile_aux_ok[t])
      throw std::invalid_argument("rasterize_backward: aux disagrees with forward recomputation");

  // Phase B: merge tile buffers in tile order (fixed reduction order keeps
  // results identical for any thread count).
  const size_t m = prep.splats.size();
  std::vector<Real> packed_grads(m * kG, Real(0));
  for (int tile = 0; tile < tiles; ++tile) {
    const int32_t begin = prep.tile_offsets[tile];
    const int32_t end = prep.tile_offsets[tile + 1];
    const auto& local = tile_grads[tile];
    if (local.empty()) continue;
    for (int32_t it = begin; it < end; ++it) {
      const size_t dst = static_cast<size_t>(prep.tile_items[it]) * kG;
      const size_t src = static_cast<size_t>(it - begin) * kG;
      for (int k = 0; k < kG; ++k) packed_grads[dst + k] += local[src + k];
    }
  }

  // Phase C: chain the screen-space gradients back to the 3D attributes.
  const Mat3T<Real> w_mat = quat_to_rotmat(camera.rotation);
  parallel_for(static_cast<int64_t>(m), [&](int64_t kb, int64_t ke) {
    for (int64_t k = kb; k < ke; ++k) {
      const PackedSplat<Real>& s = prep.splats[k];
      const Real* pg = packed_grads.data() + static_cast<size_t>(k) * kG;
      bool any = false;
      for (int j = 0; j < kG; ++j) any = any || pg[j] != Real(0);
      if (!any) continue;
      const int32_t id = s.id;
      const Gaussian3DT<Real> g = set.get(static_cast<size_t>(id));

      grads.d_color[id] += {pg[0], pg[1], pg[2]};
      grads.d_opacity[id] += pg[3];

      const Vec3T<Real> t3 = w_mat * g.position + camera.translation;
      const Real inv_z = Real(1) / t3.z;
      const Real inv_z2 = inv_z * inv_z;
      const Real j00 = camera.fx * inv_z;
      const Real j02 = -camera.fx * t3.x * inv_z2;
      const Real j11 = camera.fy * inv_z;
      const Real j12 = -camera.fy * t3.y * inv_z2;
      Real tm[2][3];
      for (int c = 0; c < 3; ++c) {
        tm[0][c] = j00 * w_mat.m[0][c] + j02 * w_mat.m[2][c];
        tm[1][c] = j11 * w_mat.m[1][c] + j12 * w_mat.m[2][c];
      }
      const QuatT<Real> qn = g.rotation.normalized();
      const Mat3T<Real> rot = quat_to_rotmat(qn);
      const Real sv[3] = {g.scale.x, g.scale.y, g.scale.z};
      Real mmat[3][3];
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) mmat[i][j] = rot.m[i][j] * sv[j];
      Real sigma3[3][3];
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          Real acc = 0;
          for (int l = 0; l < 3; ++l) acc += mmat[i][l] * mmat[j][l];
          sigma3[i][j] = acc;
        }

      // d cov2d = -A * dA * A with dA the full-matrix conic gradient.
      const Real da[2][2] = {{pg[6], pg[7]}, {pg[7], pg[8]}};
      const Real a2[2][2] = {{s.ca, s.cb}, {s.cb, s.cc}};
      Real ada[2][2] = {{0, 0}, {0, 0}};
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          for (int l = 0; l < 2; ++l) ada[i][j] += a2[i][l] * da[l][j];
      Real dcov[2][2] = {{0, 0}, {0, 0}};
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          Real acc = 0;
          for (int l = 0; l < 2; ++l) acc += ada[i][l] * a2[l][j];
          dcov[i][j] = -acc;
        }

      // d sigma3 = T^t dcov T;  dT = 2 dcov T sigma3.
      Real dsigma3[3][3];
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          Real acc = 0;
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) acc += tm[a][i] * dcov[a][b] * tm[b][j];
          dsigma3[i][j] = acc;
        }
      Real ts3[2][3];
      for (int a = 0; a < 2; ++a)
        for (int j = 0; j < 3; ++j) {
          Real acc = 0;
          for (int l = 0; l < 3; ++l) acc += tm[a][l] * sigma3[l][j];
          ts3[a][j] = acc;
        }
      Real dtm[2][3];
      for (int a = 0; a < 2; ++a)
        for (int j = 0; j < 3; ++j) {
          Real acc = 0;
          for (int b = 0; b < 2; ++b) acc += dcov[a][b] * ts3[b][j];
          dtm[a][j] = 2 * acc;
        }

      // dJ = dT W^t; only four J entries are nonzero.
      Real dj00 = 0, dj02 = 0, dj11 = 0, dj12 = 0;
      for (int c = 0; c < 3; ++c) {
        dj00 += dtm[0][c] * w_mat.m[0][c];
        dj02 += dtm[0][c] * w_mat.m[2][c];
        dj11 += dtm[1][c] * w_mat.m[1][c];
        dj12 += dtm[1][c] * w_mat.m[2][c];
      }
      Vec3T<Real> dt{0, 0, 0};
      dt.x += dj02 * (-camera.fx * inv_z2);
      dt.y += dj12 * (-camera.fy * inv_z2);
      dt.z += dj00 * (-camera.fx * inv_z2) + dj02 * (2 * camera.fx * t3.x * inv_z2 * inv_z) +
              dj11 * (-camera.fy * inv_z2) + dj12 * (2 * camera.fy * t3.y * inv_z2 * inv_z);
      // mean2d chain.
      const Real gx = pg[4], gy = pg[5];
      dt.x += gx * camera.fx * inv_z;
      dt.y += gy * camera.fy * inv_z;
      dt.z += -gx * camera.fx * t3.x * inv_z2 - gy * camera.fy * t3.y * inv_z2;
      const Mat3T<Real> w_t = w_mat.transposed();
      grads.d_position[id] += w_t * dt;

      // dM = 2 dsigma3 M;  ds_k = sum_i dM[i][k] R[i][k];  dR = dM diag(s).
      Real dm[3][3];
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          Real acc = 0;
          for (int l = 0; l < 3; ++l) acc += dsigma3[i][l] * mmat[l][j];
          dm[i][j] = 2 * acc;
        }
      Vec3T<Real> ds{0, 0, 0};
      for (int i = 0; i < 3; ++i) {
        ds.x += dm[i][0] * rot.m[i][0];
        ds.y += dm[i][1] * rot.m[i][1];
        ds.z += dm[i][2] * rot.m[i][2];
      }
      grads.d_scale[id] += ds;

      Real drdq[4][3][3];
      rotmat_quat_jacobian(qn, drdq);
      Real dqn[4] = {0, 0, 0, 0};
      for (int c = 0; c < 4; ++c)
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) dqn[c] += dm[i][j] * sv[j] * drdq[c][i][j];
      // Through the normalization: dq = (I - qn qn^t) dqn / |q|.
      const Real qraw[4] = {g.rotation.w, g.rotation.x, g.rotation.y, g.rotation.z};
      const Real qhat[4] = {qn.w, qn.x, qn.y, qn.z};
      const Real qnorm = g.rotation.norm();
      const Real dot = dqn[0] * qhat[0] + dqn[1] * qhat[1] + dqn[2] * qhat[2] + dqn[3] * qhat[3];
      QuatT<Real> dq;
      dq.w = (dqn[0] - dot * qhat[0]) / qnorm;
      dq.x = (dqn[1] - dot * qhat[1]) / qnorm;
      dq.y = (dqn[2] - dot * qhat[2]) / qnorm;
      dq.z = (dqn[3] - dot * qhat[3]) / qnorm;
      grads.d_rotation[id].w += dq.w;
      grads.d_rotation[id].x += dq.x;
      grads.d_rotation[id].y += dq.y;
      grads.d_rotation[id].z += dq.z;
      (void)qraw;
    }
  });

  return grads;
}

template RenderOutputT<float> rasterize(const GaussianSetT<float>&, const CameraT<float>&,
                                        const Vec3T<float>&);
template RenderOutputT<double> rasterize(const GaussianSetT<double>&, const CameraT<double>&,
                                         const Vec3T<double>&);
template RenderOutputT<float> reference_rasterize(const GaussianSetT<float>&,
                                                  const CameraT<float>&, const Vec3T<float>&);
template RenderOutputT<double> reference_rasterize(const GaussianSetT<double>&,
                                                   const CameraT<double>&, const Vec3T<double>&);
template GaussianGradientsT<float> rasterize_backward(const GaussianSetT<float>&,
                                                      const CameraT<float>&, const Vec3T<float>&,
                                                      const std::vector<float>&,
                                                      const RenderOutputT<float>&);
template GaussianGradientsT<double> rasterize_backward(const GaussianSetT<double>&,
                                                       const CameraT<double>&, const Vec3T<double>&,
                                                       const std::vector<double>&,
                                                       const RenderOutputT<double>&);

}  // namespace gsa
