#include "gsavatar/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gsa {

void ModelConfig::validate(bool strict) const {
  if (views < 1) throw std::invalid_argument("config: views must be >= 1");
  if (height < 1 || width < 1) throw std::invalid_argument("config: bad resolution");
  if (patch_size < 1 || height % patch_size != 0 || width % patch_size != 0)
    throw std::invalid_argument("config: resolution not divisible by patch size");
  if (dim < 1 || dim % heads != 0) throw std::invalid_argument("config: dim must divide by heads");
  if (strict && (self_depth < 1 || cross_depth < 1))
    throw std::invalid_argument("config: depths must be >= 1");
  if (self_depth < 0 || cross_depth < 0) throw std::invalid_argument("config: negative depth");
  if (expr_tokens < 1 || expr_dim < 1) throw std::invalid_argument("config: bad expression dims");
  if (feat_dim < 1) throw std::invalid_argument("config: bad feature dim");
  if (!(conf_threshold >= 0 && conf_threshold <= 1))
    throw std::invalid_argument("config: conf_threshold outside [0,1]");
  if (!(scale_min > 0 && scale_max > scale_min))
    throw std::invalid_argument("config: bad scale bounds");
}

template <typename Real>
void InputBundleT<Real>::compute_plucker() {
  if (static_cast<int>(cameras.size()) != views)
    throw std::invalid_argument("bundle: camera count mismatch");
  plucker.resize(static_cast<size_t>(views) * height * width * 6);
  for (int v = 0; v < views; ++v) {
    const PluckerMapT<Real> map = plucker_rays(cameras[v]);
    std::copy(map.data.begin(), map.data.end(),
              plucker.begin() + static_cast<size_t>(v) * height * width * 6);
  }
}

template <typename Real>
void InputBundleT<Real>::validate() const {
  if (views < 1) throw std::invalid_argument("bundle: empty");
  if (height != width) throw std::invalid_argument("bundle: crops must be square");
  const size_t px = static_cast<size_t>(views) * height * width;
  if (images.size() != px * 3 || positions.size() != px * 3 || confidence.size() != px ||
      plucker.size() != px * 6)
    throw std::invalid_argument("bundle: map sizes disagree");
  if (features.size() != static_cast<size_t>(views) * feat_h * feat_w * feat_dim)
    throw std::invalid_argument("bundle: feature map size disagrees");
  if (static_cast<int>(cameras.size()) != views)
    throw std::invalid_argument("bundle: camera count mismatch");
  for (const auto& c : cameras) {
    c.validate();
    if (c.width != width || c.height != height)
      throw std::invalid_argument("bundle: camera resolution mismatch");
  }
  for (Real v : confidence)
    if (!(v >= Real(0) && v <= Real(1))) throw std::invalid_argument("bundle: confidence outside [0,1]");
}

template <typename Real>
template <typename Other>
InputBundleT<Other> InputBundleT<Real>::cast() const {
  InputBundleT<Other> out;
  out.views = views;
  out.height = height;
  out.width = width;
  out.feat_h = feat_h;
  out.feat_w = feat_w;
  out.feat_dim = feat_dim;
  auto cv = [](const std::vector<Real>& in, std::vector<Other>& o) {
    o.resize(in.size());
    for (size_t i = 0; i < in.size(); ++i) o[i] = static_cast<Other>(in[i]);
  };
  cv(images, out.images);
  cv(positions, out.positions);
  cv(confidence, out.confidence);
  cv(features, out.features);
  cv(plucker, out.plucker);
  for (const auto& c : cameras) out.cameras.push_back(c.template cast<Other>());
  return out;
}

// ---------------------------------------------------------------------------

template <typename Real>
void TransformerBlockT<Real>::init(ParamStoreT<Real>& ps, const std::string& name, int64_t dim,
                                   int heads, bool cross, Rng& rng) {
  cross_ = cross;
  ln1_.init(ps, name + ".ln1", dim);
  ln2_.init(ps, name + ".ln2", dim);
  attn_.init(ps, name + ".attn", dim, heads, rng, cross ? 0.0 : 0.02);
  ff_.init(ps, name + ".ff", dim, 4 * dim, dim, Activation::kGelu, rng, 0.02, 0.02);
}

template <typename Real>
TensorT<Real> TransformerBlockT<Real>::forward(ParamStoreT<Real>& ps, const TensorT<Real>& x,
                                               const TensorT<Real>* kv, int64_t block_size) {
  if (cross_ && kv == nullptr) throw std::invalid_argument("cross block needs kv tokens");
  TensorT<Real> a_in = ln1_.forward(ps, x);
  TensorT<Real> a = attn_.forward(ps, a_in, cross_ ? *kv : a_in, block_size);
  TensorT<Real> x1 = x;
  for (int64_t i = 0; i < x1.numel(); ++i) x1.data[i] += a.data[i];
  TensorT<Real> f_in = ln2_.forward(ps, x1);
  TensorT<Real> f = ff_.forward(ps, f_in);
  for (int64_t i = 0; i < x1.numel(); ++i) f.data[i] += x1.data[i];
  f.shape = x.shape;
  return f;
}

template <typename Real>
TensorT<Real> TransformerBlockT<Real>::backward(ParamStoreT<Real>& ps, const TensorT<Real>& dy,
                                                TensorT<Real>* d_kv) {
  TensorT<Real> d_f_in = ff_.backward(ps, dy);
  TensorT<Real> dx1 = ln2_.backward(ps, d_f_in);
  for (int64_t i = 0; i < dx1.numel(); ++i) dx1.data[i] += dy.data[i];

  auto [d_a_in, d_kv_part] = attn_.backward(ps, dx1);
  if (cross_) {
    if (d_kv) {
      if (d_kv->numel() == 0) *d_kv = TensorT<Real>(d_kv_part.shape);
      for (int64_t i = 0; i < d_kv_part.numel(); ++i) d_kv->data[i] += d_kv_part.data[i];
    }
  } else {
    for (int64_t i = 0; i < d_a_in.numel(); ++i) d_a_in.data[i] += d_kv_part.data[i];
  }
  TensorT<Real> dx = ln1_.backward(ps, d_a_in);
  for (int64_t i = 0; i < dx.numel(); ++i) dx.data[i] += dx1.data[i];
  return dx;
}

// ---------------------------------------------------------------------------

template <typename Real>
void TokenUpsamplerT<Real>::init(ParamStoreT<Real>& ps, const std::string& name, int64_t dim,
                                 int heads, int patch, Rng& rng) {
  patch_ = patch;
  block_.init(ps, name + ".block", dim, heads, /*cross=*/false, rng);
  // Attribute head: starts at exactly zero so raw maps are zero at init and
  // the skip connections dominate.
  expand_.init(ps, name + ".expand", dim, int64_t(patch) * patch * kGaussianChannels, rng, 0.0);
}

template <typename Real>
TensorT<Real> TokenUpsamplerT<Real>::forward(ParamStoreT<Real>& ps, const TensorT<Real>& tokens,
                                             int v, int hp, int wp) {
  v_ = v;
  hp_ = hp;
  wp_ = wp;
  win_ = 1;
  for (int cand : {4, 2}) {
    if (hp % cand == 0 && wp % cand == 0) {
      win_ = cand;
      break;
    }
  }
  const int64_t dim = tokens.numel() / (int64_t(v) * hp * wp);
  const int64_t t_count = int64_t(v) * hp * wp;

  // Window-major permutation so each window is a contiguous block.
  perm_.resize(t_count);
  int64_t idx = 0;
  for (int vi = 0; vi < v; ++vi)
    for (int wy = 0; wy < hp / win_; ++wy)
      for (int wx = 0; wx < wp / win_; ++wx)
        for (int iy = 0; iy < win_; ++iy)
          for (int ix = 0; ix < win_; ++ix)
            perm_[idx++] = (int64_t(vi) * hp + wy * win_ + iy) * wp + wx * win_ + ix;

  TensorT<Real> permuted({t_count, dim});
  for (int64_t t = 0; t < t_count; ++t)
    std::copy_n(tokens.ptr() + perm_[t] * dim, dim, permuted.ptr() + t * dim);

  TensorT<Real> refined = block_.forward(ps, permuted, nullptr, int64_t(win_) * win_);

  TensorT<Real> row_major({t_count, dim});
  for (int64_t t = 0; t < t_count; ++t)
    std::copy_n(refined.ptr() + t * dim, dim, row_major.ptr() + perm_[t] * dim);

  TensorT<Real> expanded = expand_.forward(ps, row_major);  // [T, p*p*CG]

  const int h = hp * patch_, w = wp * patch_;
  TensorT<Real> maps({int64_t(v), h, w, kGaussianChannels});
  for (int vi = 0; vi < v; ++vi)
    for (int py = 0; py < hp; ++py)
      for (int px = 0; px < wp; ++px) {
        const Real* e = expanded.ptr() +
                        ((int64_t(vi) * hp + py) * wp + px) * patch_ * patch_ * kGaussianChannels;
        for (int dy = 0; dy < patch_; ++dy)
          for (int dx = 0; dx < patch_; ++dx) {
            Real* m = maps.ptr() +
                      (((int64_t(vi) * h) + py * patch_ + dy) * w + px * patch_ + dx) *
                          kGaussianChannels;
            std::copy_n(e + (dy * patch_ + dx) * kGaussianChannels, kGaussianChannels, m);
          }
      }
  return maps;
}

template <typename Real>
TensorT<Real> TokenUpsamplerT<Real>::backward(ParamStoreT<Real>& ps, const TensorT<Real>& d_maps) {
  const int h = hp_ * patch_, w = wp_ * patch_;
  const int64_t t_count = int64_t(v_) * hp_ * wp_;
  TensorT<Real> d_expanded({t_count, int64_t(patch_) * patch_ * kGaussianChannels});
  for (int vi = 0; vi < v_; ++vi)
    for (int py = 0; py < hp_; ++py)
      for (int px = 0; px < wp_; ++px) {
        Real* e = d_expanded.ptr() +
                  ((int64_t(vi) * hp_ + py) * wp_ + px) * patch_ * patch_ * kGaussianChannels;
        for (int dy = 0; dy < patch_; ++dy)
          for (int dx = 0; dx < patch_; ++dx) {
            const Real* m = d_maps.ptr() +
                            (((int64_t(vi) * h) + py * patch_ + dy) * w + px * patch_ + dx) *
                                kGaussianChannels;
            std::copy_n(m, kGaussianChannels, e + (dy * patch_ + dx) * kGaussianChannels);
          }
      }
  TensorT<Real> d_row_major = expand_.backward(ps, d_expanded);
  const int64_t dim = d_row_major.numel() / t_count;
  TensorT<Real> d_refined({t_count, dim});
  for (int64_t t = 0; t < t_count; ++t)
    std::copy_n(d_row_major.ptr() + perm_[t] * dim, dim, d_refined.ptr() + t * dim);
  TensorT<Real> d_permuted = block_.backward(ps, d_refined, nullptr);
  TensorT<Real> d_tokens({t_count, dim});
  for (int64_t t = 0; t < t_count; ++t)
    std::copy_n(d_permuted.ptr() + t * dim, dim, d_tokens.ptr() + perm_[t] * dim);
  return d_tokens;
}

// ---------------------------------------------------------------------------

namespace {

template <typename Real>
Real sigmoid(Real x) {
  return Real(1) / (Real(1) + std::exp(-x));
}

}  // namespace

template <typename Real>
AssembleResultT<Real> assemble_gaussians(const TensorT<Real>& raw_maps,
                                         const InputBundleT<Real>& bundle, double tau,
                                         const ModelConfig& cfg) {
  const int v = bundle.views, h = bundle.height, w = bundle.width;
  if (raw_maps.numel() != int64_t(v) * h * w * kGaussianChannels)
    throw std::invalid_argument("assemble: raw map shape mismatch");
  AssembleResultT<Real> res;
  res.views = v;
  res.height = h;
  res.width = w;
  const int64_t px_count = int64_t(v) * h * w;
  res.set.reserve(static_cast<size_t>(px_count) / 2);
  res.set.source_views.clear();
  const Real s_min = Real(cfg.scale_min), s_max = Real(cfg.scale_max);
  for (int64_t p = 0; p < px_count; ++p) {
    if (!(bundle.confidence[p] > Real(tau))) continue;
    const Real* m = raw_maps.ptr() + p * kGaussianChannels;
    Gaussian3DT<Real> g;
    g.position = {Real(std::tanh(double(m[0]))) * Real(kPosDelta) + bundle.positions[p * 3 + 0],
                  Real(std::tanh(double(m[1]))) * Real(kPosDelta) + bundle.positions[p * 3 + 1],
                  Real(std::tanh(double(m[2]))) * Real(kPosDelta) + bundle.positions[p * 3 + 2]};
    g.scale = {s_min + (s_max - s_min) * sigmoid(m[3]), s_min + (s_max - s_min) * sigmoid(m[4]),
               s_min + (s_max - s_min) * sigmoid(m[5])};
    g.rotation = QuatT<Real>{m[6] + Real(1), m[7], m[8], m[9]}.normalized();
    g.color = {std::clamp(m[10] + bundle.images[p * 3 + 0], Real(0), Real(1)),
               std::clamp(m[11] + bundle.images[p * 3 + 1], Real(0), Real(1)),
               std::clamp(m[12] + bundle.images[p * 3 + 2], Real(0), Real(1))};
    g.opacity = sigmoid(m[13]);
    res.set.push(g, static_cast<int32_t>(p / (int64_t(h) * w)));
    res.pixel_index.push_back(p);
  }
  return res;
}

template <typename Real>
TensorT<Real> assemble_backward(const AssembleResultT<Real>& res, const TensorT<Real>& raw_maps,
                                const InputBundleT<Real>& bundle,
                                const GaussianGradientsT<Real>& dg, const ModelConfig& cfg) {
  if (dg.size() != res.set.size())
    throw std::invalid_argument("assemble_backward: gradient count mismatch");
  TensorT<Real> d_maps(raw_maps.shape);
  const Real s_min = Real(cfg.scale_min), s_max = Real(cfg.scale_max);
  for (size_t i = 0; i < res.set.size(); ++i) {
    const int64_t p = res.pixel_index[i];
    const Real* m = raw_maps.ptr() + p * kGaussianChannels;
    Real* d = d_maps.ptr() + p * kGaussianChannels;
    // position: d raw = d pos * kPosDelta * (1 - tanh^2)
    for (int k = 0; k < 3; ++k) {
      const Real th = Real(std::tanh(double(m[k])));
      const Real dp = k == 0 ? dg.d_position[i].x : (k == 1 ? dg.d_position[i].y : dg.d_position[i].z);
      d[k] = dp * Real(kPosDelta) * (Real(1) - th * th);
    }
    // scale: bounded sigmoid
    for (int k = 0; k < 3; ++k) {
      const Real s = sigmoid(m[3 + k]);
      const Real dsv = k == 0 ? dg.d_scale[i].x : (k == 1 ? dg.d_scale[i].y : dg.d_scale[i].z);
      d[3 + k] = dsv * (s_max - s_min) * s * (Real(1) - s);
    }
    // rotation: normalize(raw + identity)
    {
      const Real vq[4] = {m[6] + Real(1), m[7], m[8], m[9]};
      const Real nrm = std::sqrt(vq[0] * vq[0] + vq[1] * vq[1] + vq[2] * vq[2] + vq[3] * vq[3]);
      const Real qh[4] = {vq[0] / nrm, vq[1] / nrm, vq[2] / nrm, vq[3] / nrm};
      const Real dq[4] = {dg.d_rotation[i].w, dg.d_rotation[i].x, dg.d_rotation[i].y,
                          dg.d_rotation[i].z};
      const Real dot = dq[0] * qh[0] + dq[1] * qh[1] + dq[2] * qh[2] + dq[3] * qh[3];
      for (int k = 0; k < 4; ++k) d[6 + k] = (dq[k] - dot * qh[k]) / nrm;
    }
    // color: clamp passes gradient only strictly inside (0,1)
    for (int k = 0; k < 3; ++k) {
      const Real pre = m[10 + k] + bundle.images[p * 3 + k];
      const Real dc = k == 0 ? dg.d_color[i].x : (k == 1 ? dg.d_color[i].y : dg.d_color[i].z);
      d[10 + k] = (pre > Real(0) && pre < Real(1)) ? dc : Real(0);
    }
    // opacity logit
    {
      const Real s = sigmoid(m[13]);
      d[13] = dg.d_opacity[i] * s * (Real(1) - s);
    }
  }
  return d_maps;
}

// ---------------------------------------------------------------------------

template <typename Real>
ReconstructorT<Real>::ReconstructorT(const ModelConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate(/*strict=*/false);
  Rng rng(init_seed);
  patch_.init(store_, "patch_embed", 12, cfg_.patch_size, cfg_.dim, rng);
  fuse_.init(store_, "fuse", cfg_.dim + cfg_.feat_dim, cfg_.dim, rng, 0.02);
  expr_mlp_.init(store_, "expr_mlp", cfg_.expr_dim, kExprMlpHidden,
                 int64_t(cfg_.expr_tokens) * cfg_.dim, Activation::kRelu, rng, 0.02, 0.02);
  self_blocks_.resize(cfg_.self_depth);
  for (int i = 0; i < cfg_.self_depth; ++i)
    self_blocks_[i].init(store_, "self." + std::to_string(i), cfg_.dim, cfg_.heads, false, rng);
  cross_blocks_.resize(cfg_.cross_depth);
  for (int i = 0; i < cfg_.cross_depth; ++i)
    cross_blocks_[i].init(store_, "cross." + std::to_string(i), cfg_.dim, cfg_.heads, true, rng);
  upsampler_.init(store_, "upsampler", cfg_.dim, cfg_.heads, cfg_.patch_size, rng);
}

template <typename Real>
TokenGridT<Real> ReconstructorT<Real>::patchify_inputs(const InputBundleT<Real>& bundle) {
  bundle.validate();
  const int v = bundle.views, h = bundle.height, w = bundle.width;
  if (h % cfg_.patch_size != 0)
    throw std::invalid_argument("patchify: resolution not divisible by patch size");
  // Channelwise concat [image, position map, plucker rays] = 12 channels.
  TensorT<Real> maps({int64_t(v), h, w, 12});
  const int64_t px_count = int64_t(v) * h * w;
  for (int64_t p = 0; p < px_count; ++p) {
    Real* m = maps.ptr() + p * 12;
    m[0] = bundle.images[p * 3 + 0];
    m[1] = bundle.images[p * 3 + 1];
    m[2] = bundle.images[p * 3 + 2];
    m[3] = bundle.positions[p * 3 + 0];
    m[4] = bundle.positions[p * 3 + 1];
    m[5] = bundle.positions[p * 3 + 2];
    for (int k = 0; k < 6; ++k) m[6 + k] = bundle.plucker[p * 6 + k];
  }
  TokenGridT<Real> grid;
  grid.views = v;
  grid.hp = h / cfg_.patch_size;
  grid.wp = w / cfg_.patch_size;
  grid.dim = cfg_.dim;
  grid.tokens = patch_.forward(store_, maps, v, h, w);
  return grid;
}

template <typename Real>
TensorT<Real> ReconstructorT<Real>::concat_features(const TokenGridT<Real>& grid,
                                                    const InputBundleT<Real>& bundle) {
  if (bundle.feat_dim != cfg_.feat_dim)
    throw std::invalid_argument("fuse: feature channel count mismatch");
  const int64_t t_count = int64_t(grid.views) * grid.hp * grid.wp;
  TensorT<Real> concat({t_count, int64_t(cfg_.dim + cfg_.feat_dim)});
  std::vector<Real> resampled(static_cast<size_t>(grid.hp) * grid.wp * cfg_.feat_dim);
  for (int v = 0; v < grid.views; ++v) {
    grid_resample_forward(
        bundle.features.data() + static_cast<size_t>(v) * bundle.feat_h * bundle.feat_w * cfg_.feat_dim,
        bundle.feat_h, bundle.feat_w, cfg_.feat_dim, resampled.data(), grid.hp, grid.wp);
    for (int64_t t = 0; t < int64_t(grid.hp) * grid.wp; ++t) {
      const int64_t row = int64_t(v) * grid.hp * grid.wp + t;
      std::copy_n(grid.tokens.ptr() + row * cfg_.dim, cfg_.dim, concat.ptr() + row * concat.dim(1));
      std::copy_n(resampled.data() + t * cfg_.feat_dim, cfg_.feat_dim,
                  concat.ptr() + row * concat.dim(1) + cfg_.dim);
    }
  }
  return concat;
}

template <typename Real>
TokenGridT<Real> ReconstructorT<Real>::fuse_features(const TokenGridT<Real>& grid,
                                                     const InputBundleT<Real>& bundle) {
  TokenGridT<Real> out = grid;
  out.tokens = fuse_.forward(store_, concat_features(grid, bundle));
  return out;
}

template <typename Real>
TokenGridT<Real> ReconstructorT<Real>::encode(const TokenGridT<Real>& grid) {
  TokenGridT<Real> out = grid;
  for (auto& blk : self_blocks_) out.tokens = blk.forward(store_, out.tokens, nullptr);
  return out;
}

template <typename Real>
TensorT<Real> ReconstructorT<Real>::expression_tokens(const std::vector<Real>& z) {
  if (static_cast<int>(z.size()) != cfg_.expr_dim)
    throw std::invalid_argument("expression code dimension mismatch");
  TensorT<Real> zt({1, int64_t(cfg_.expr_dim)});
  std::copy(z.begin(), z.end(), zt.ptr());
  TensorT<Real> f = expr_mlp_.forward(store_, zt);
  f.shape = {int64_t(cfg_.expr_tokens), int64_t(cfg_.dim)};
  return f;
}

template <typename Real>
TokenGridT<Real> ReconstructorT<Real>::inject_expression(const TokenGridT<Real>& grid,
                                                         const std::vector<Real>& z) {
  TensorT<Real> f_exp = expression_tokens(z);
  TokenGridT<Real> out = grid;
  for (auto& blk : cross_blocks_) out.tokens = blk.forward(store_, out.tokens, &f_exp);
  return out;
}

template <typename Real>
TensorT<Real> ReconstructorT<Real>::decode_attribute_maps(const TokenGridT<Real>& grid) {
  return upsampler_.forward(store_, grid.tokens, grid.views, grid.hp, grid.wp);
}

template <typename Real>
const AssembleResultT<Real>& ReconstructorT<Real>::forward(const InputBundleT<Real>& bundle,
                                                           const std::vector<Real>& z) {
  bundle_ = &bundle;
  fwd_v_ = bundle.views;
  TokenGridT<Real> grid = patchify_inputs(bundle);
  grid = fuse_features(grid, bundle);
  TensorT<Real> f_exp = expression_tokens(z);

  const int pairs = std::min(cfg_.self_depth, cfg_.cross_depth);
  for (int i = 0; i < pairs; ++i) {
    grid.tokens = self_blocks_[i].forward(store_, grid.tokens, nullptr);
    grid.tokens = cross_blocks_[i].forward(store_, grid.tokens, &f_exp);
  }
  for (int i = pairs; i < cfg_.self_depth; ++i)
    grid.tokens = self_blocks_[i].forward(store_, grid.tokens, nullptr);
  for (int i = pairs; i < cfg_.cross_depth; ++i)
    grid.tokens = cross_blocks_[i].forward(store_, grid.tokens, &f_exp);

  raw_maps_ = upsampler_.forward(store_, grid.tokens, grid.views, grid.hp, grid.wp);
  assembled_ = assemble_gaussians(raw_maps_, bundle, cfg_.conf_threshold, cfg_);
  return assembled_;
}

template <typename Real>
void ReconstructorT<Real>::backward(const GaussianGradientsT<Real>& dg) {
  if (bundle_ == nullptr) throw std::logic_error("backward called before forward");
  TensorT<Real> d_maps = assemble_backward(assembled_, raw_maps_, *bundle_, dg, cfg_);
  TensorT<Real> d_tokens = upsampler_.backward(store_, d_maps);

  TensorT<Real> d_f_exp;
  const int pairs = std::min(cfg_.self_depth, cfg_.cross_depth);
  for (int i = cfg_.cross_depth; i-- > pairs;)
    d_tokens = cross_blocks_[i].backward(store_, d_tokens, &d_f_exp);
  for (int i = cfg_.self_depth; i-- > pairs;)
    d_tokens = self_blocks_[i].backward(store_, d_tokens, nullptr);
  for (int i = pairs; i-- > 0;) {
    d_tokens = cross_blocks_[i].backward(store_, d_tokens, &d_f_exp);
    d_tokens = self_blocks_[i].backward(store_, d_tokens, nullptr);
  }
  if (d_f_exp.numel() > 0) {
    d_f_exp.shape = {1, int64_t(cfg_.expr_tokens) * cfg_.dim};
    expr_mlp_.backward(store_, d_f_exp);
  }

  TensorT<Real> d_concat = fuse_.backward(store_, d_tokens);
  const int64_t t_count = d_concat.dim(0);
  TensorT<Real> d_grid({t_count, int64_t(cfg_.dim)});
  for (int64_t t = 0; t < t_count; ++t)
    std::copy_n(d_concat.ptr() + t * (cfg_.dim + cfg_.feat_dim), cfg_.dim,
                d_grid.ptr() + t * cfg_.dim);
  patch_.backward(store_, d_grid, nullptr);
}

#define GSA_MODEL_INSTANTIATE(Real)                                                        \
  template struct InputBundleT<Real>;                                                      \
  template InputBundleT<float> InputBundleT<Real>::cast<float>() const;                    \
  template InputBundleT<double> InputBundleT<Real>::cast<double>() const;                  \
  template class TransformerBlockT<Real>;                                                  \
  template class TokenUpsamplerT<Real>;                                                    \
  template AssembleResultT<Real> assemble_gaussians(const TensorT<Real>&,                  \
                                                    const InputBundleT<Real>&, double,     \
                                                    const ModelConfig&);                   \
  template TensorT<Real> assemble_backward(const AssembleResultT<Real>&,                   \
                                           const TensorT<Real>&, const InputBundleT<Real>&, \
                                           const GaussianGradientsT<Real>&,                 \
                                           const ModelConfig&);                            \
  template class ReconstructorT<Real>;

GSA_MODEL_INSTANTIATE(float)
GSA_MODEL_INSTANTIATE(double)

}  // namespace gsa
