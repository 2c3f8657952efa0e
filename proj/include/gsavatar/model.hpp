#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gsavatar/gaussian_set.hpp"
#include "gsavatar/geometry.hpp"
#include "gsavatar/nn.hpp"
#include "gsavatar/tensor.hpp"

namespace gsa {

// Raw attribute map channel layout, per pixel:
//   [0..2]  position offset (tanh-bounded, added to the position map)
//   [3..5]  scale (bounded sigmoid between scale_min and scale_max)
//   [6..9]  rotation (w,x,y,z offset from the identity quaternion, normalized)
//   [10..12] color offset (added to the input image, clamped to [0,1])
//   [13]    opacity logit
inline constexpr int kGaussianChannels = 14;
inline constexpr double kPosDelta = 0.1;      // scene units, tanh radius
inline constexpr int kExprMlpHidden = 256;    // expression MLP hidden width

struct ModelConfig {
  int views = 4;
  int height = 128, width = 128;
  int patch_size = 8;
  int dim = 128;
  int self_depth = 4;
  int cross_depth = 4;
  int expr_tokens = 4;  // S
  int expr_dim = 8;     // C_exp
  int feat_dim = 12;    // C_f
  int heads = 4;
  double conf_threshold = 0.5;
  double scale_min = 1e-3;
  double scale_max = 0.1;

  // The configuration this artifact trains end to end.
  static ModelConfig desk() { return ModelConfig{}; }

  // The full-scale configuration from the original system, kept for
  // documentation: patch 8, dim 768, 8+8 layers, 256-dim expression code,
  // 1920-dim feature maps, 512x512 inputs.
  static ModelConfig paper() {
    ModelConfig c;
    c.height = c.width = 512;
    c.dim = 768;
    c.self_depth = c.cross_depth = 8;
    c.expr_dim = 256;
    c.feat_dim = 1920;
    c.heads = 24;
    return c;
  }

  // strict: additionally require at least one layer of each kind (the
  // programmatic depth-0 escape hatch exists for tests only).
  void validate(bool strict = true) const;

  int tokens_h() const { return height / patch_size; }
  int tokens_w() const { return width / patch_size; }
};

template <typename Real>
struct InputBundleT {
  int views = 0, height = 0, width = 0;
  int feat_h = 0, feat_w = 0, feat_dim = 0;
  std::vector<Real> images;      // V*H*W*3, [0,1]
  std::vector<Real> positions;   // V*H*W*3, canonical frame
  std::vector<Real> confidence;  // V*H*W, [0,1]
  std::vector<Real> features;    // V*feat_h*feat_w*feat_dim
  std::vector<Real> plucker;     // V*H*W*6, derived from cameras
  std::vector<CameraT<Real>> cameras;

  void compute_plucker();
  void validate() const;

  template <typename Other>
  InputBundleT<Other> cast() const;
};

template <typename Real>
struct TokenGridT {
  int views = 0, hp = 0, wp = 0, dim = 0;
  TensorT<Real> tokens;  // [views*hp*wp, dim]
};

// Pre-norm transformer block: x + Attn(LN(x)[, kv]) followed by
// x + FF(LN(x)), feed-forward hidden 4*dim with GELU. Cross blocks read
// their keys/values from an external token matrix and zero-init the
// attention output projection so they start as the identity.
template <typename Real>
class TransformerBlockT {
 public:
  void init(ParamStoreT<Real>& ps, const std::string& name, int64_t dim, int heads, bool cross,
            Rng& rng);
  TensorT<Real> forward(ParamStoreT<Real>& ps, const TensorT<Real>& x, const TensorT<Real>* kv,
                        int64_t block_size = 0);
  TensorT<Real> backward(ParamStoreT<Real>& ps, const TensorT<Real>& dy, TensorT<Real>* d_kv);

  MultiHeadAttentionT<Real>& attention() { return attn_; }

 private:
  bool cross_ = false;
  LayerNormT<Real> ln1_, ln2_;
  MultiHeadAttentionT<Real> attn_;
  MlpT<Real> ff_;
};

// Windowed-attention refinement plus learned channel expansion to
// patch^2 * kGaussianChannels and depth-to-space back to pixel resolution.
// The expansion layer is the attribute head and starts at exactly zero.
template <typename Real>
class TokenUpsamplerT {
 public:
  void init(ParamStoreT<Real>& ps, const std::string& name, int64_t dim, int heads, int patch,
            Rng& rng);
  TensorT<Real> forward(ParamStoreT<Real>& ps, const TensorT<Real>& tokens, int v, int hp, int wp);
  TensorT<Real> backward(ParamStoreT<Real>& ps, const TensorT<Real>& d_maps);

 private:
  TransformerBlockT<Real> block_;
  LinearT<Real> expand_;
  int patch_ = 8;
  int v_ = 0, hp_ = 0, wp_ = 0, win_ = 1;
  std::vector<int64_t> perm_;  // window-major gather order of the last forward
};

template <typename Real>
struct AssembleResultT {
  GaussianSetT<Real> set;
  // Per Gaussian: flat source pixel v*H*W + y*W + x into the attribute maps.
  std::vector<int64_t> pixel_index;
  int views = 0, height = 0, width = 0;
};

// Eq.-style spawning: per pixel applies the attribute activations and the
// position/color skip connections, then keeps the pixel iff its confidence is
// strictly greater than tau. Source-view tags record the spawning view.
template <typename Real>
AssembleResultT<Real> assemble_gaussians(const TensorT<Real>& raw_maps,
                                         const InputBundleT<Real>& bundle, double tau,
                                         const ModelConfig& cfg);

// Gradient of assemble_gaussians w.r.t. the raw maps (zero for filtered
// pixels).
template <typename Real>
TensorT<Real> assemble_backward(const AssembleResultT<Real>& res, const TensorT<Real>& raw_maps,
                                const InputBundleT<Real>& bundle,
                                const GaussianGradientsT<Real>& dg, const ModelConfig& cfg);

// The animatable reconstructor: patchify -> feature fusion -> interleaved
// dense self-attention / expression cross-attention -> token upsampling ->
// skip connections and confidence gating.
template <typename Real>
class ReconstructorT {
 public:
  ReconstructorT(const ModelConfig& cfg, uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStoreT<Real>& params() { return store_; }
  const ParamStoreT<Real>& params() const { return store_; }

  // Pipeline stages, individually callable.
  TokenGridT<Real> patchify_inputs(const InputBundleT<Real>& bundle);
  TokenGridT<Real> fuse_features(const TokenGridT<Real>& grid, const InputBundleT<Real>& bundle);
  TokenGridT<Real> encode(const TokenGridT<Real>& grid);  // all self blocks
  TokenGridT<Real> inject_expression(const TokenGridT<Real>& grid, const std::vector<Real>& z);
  TensorT<Real> decode_attribute_maps(const TokenGridT<Real>& grid);

  // Full forward: stages composed with self/cross blocks interleaved in
  // (self, cross) pairs; leftover blocks of the deeper kind run after the
  // pairs. Caches everything backward() needs.
  const AssembleResultT<Real>& forward(const InputBundleT<Real>& bundle,
                                       const std::vector<Real>& z);

  // Accumulates parameter gradients for the last forward into params().grad.
  void backward(const GaussianGradientsT<Real>& dg);

 private:
  TensorT<Real> expression_tokens(const std::vector<Real>& z);
  TensorT<Real> concat_features(const TokenGridT<Real>& grid, const InputBundleT<Real>& bundle);

  ModelConfig cfg_;
  ParamStoreT<Real> store_;
  PatchEmbedT<Real> patch_;
  LinearT<Real> fuse_;
  MlpT<Real> expr_mlp_;
  std::vector<TransformerBlockT<Real>> self_blocks_, cross_blocks_;
  TokenUpsamplerT<Real> upsampler_;

  // Last-forward caches.
  const InputBundleT<Real>* bundle_ = nullptr;
  TensorT<Real> raw_maps_;
  AssembleResultT<Real> assembled_;
  int fwd_v_ = 0;
};

using Reconstructor = ReconstructorT<float>;
using InputBundle = InputBundleT<float>;

}  // namespace gsa
