#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gsavatar/rng.hpp"
#include "gsavatar/tensor.hpp"

namespace gsa {

// Matrix kernels. All of them accumulate each output element in a fixed
// k-order, so results are bit-identical for any thread count. Shapes are
// row-major.
//   matmul:    c[m,n] (+)= a[m,k] * b[k,n]
//   matmul_nt: c[m,n] (+)= a[m,k] * bt[n,k]^T
//   matmul_tn: c[m,n] (+)= at[k,m]^T * b[k,n]
template <typename Real>
void matmul(const Real* a, const Real* b, Real* c, int64_t m, int64_t k, int64_t n,
            bool accumulate = false);
template <typename Real>
void matmul_nt(const Real* a, const Real* bt, Real* c, int64_t m, int64_t k, int64_t n,
               bool accumulate = false);
template <typename Real>
void matmul_tn(const Real* at, const Real* b, Real* c, int64_t m, int64_t k, int64_t n,
               bool accumulate = false);

// ---------------------------------------------------------------------------
// Parameter store with per-parameter Adam state.

template <typename Real>
struct ParamEntry {
  std::string name;
  TensorT<Real> value, grad, m, v;
  int64_t t = 0;  // per-parameter Adam step count
};

template <typename Real>
struct ParamStoreT {
  std::vector<ParamEntry<Real>> entries;
  std::unordered_map<std::string, int32_t> by_name;
  int64_t nonfinite_skips = 0;  // diagnostic: updates skipped on non-finite grads

  int32_t add(const std::string& name, const std::vector<int64_t>& shape) {
    if (by_name.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
    ParamEntry<Real> e;
    e.name = name;
    e.value = TensorT<Real>(shape);
    e.grad = TensorT<Real>(shape);
    e.m = TensorT<Real>(shape);
    e.v = TensorT<Real>(shape);
    entries.push_back(std::move(e));
    const int32_t h = static_cast<int32_t>(entries.size()) - 1;
    by_name.emplace(name, h);
    return h;
  }

  ParamEntry<Real>& operator[](int32_t h) { return entries[static_cast<size_t>(h)]; }
  const ParamEntry<Real>& operator[](int32_t h) const { return entries[static_cast<size_t>(h)]; }

  void zero_grads() {
    for (auto& e : entries) e.grad.zero();
  }
  int64_t num_params() const {
    int64_t n = 0;
    for (const auto& e : entries) n += e.value.numel();
    return n;
  }
  double grad_norm() const {
    double acc = 0;
    for (const auto& e : entries)
      for (Real g : e.grad.data) acc += double(g) * double(g);
    return std::sqrt(acc);
  }
  void scale_grads(double s) {
    for (auto& e : entries)
      for (Real& g : e.grad.data) g = Real(double(g) * s);
  }
};

struct AdamConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam on every entry. A tensor whose gradient contains a
// non-finite value is left untouched (value, moments and t), and the store's
// diagnostic counter is bumped. Returns the number of skipped tensors.
// The update of each parameter element depends only on that element, so the
// result is independent of entry iteration order.
template <typename Real>
int adam_step(ParamStoreT<Real>& store, const AdamConfig& cfg);

// Truncated normal init (resample outside +-2 stddev), the project-wide
// default for projection weights.
template <typename Real>
void init_trunc_normal(TensorT<Real>& t, Rng& rng, double stddev);

// ---------------------------------------------------------------------------
// Differentiable primitives. Each layer caches what its backward needs;
// backward accumulates parameter gradients into the store and returns input
// gradients.

template <typename Real>
class LinearT {
 public:
  void init(ParamStoreT<Real>& ps, const std::string& name, int64_t in, int64_t out, Rng& rng,
            double w_std);
  // x: [n, in] -> [n, out]
  TensorT<Real> forward(ParamStoreT<Real>& ps, const TensorT<Real>& x);
  TensorT<Real> backward(ParamStoreT<Real>& ps, const TensorT<Real>& dy);
  int32_t w = -1, b = -1;

 private:
  TensorT<Real> x_;
};

template <typename Real>
class LayerNormT {
 public:
  void init(ParamStoreT<Real>& ps, const std::string& name, int64_t dim);
  TensorT<Real> forward(ParamStoreT<Real>& ps, const TensorT<Real>& x);
  TensorT<Real> backward(ParamStoreT<Real>& ps, const TensorT<Real>& dy);
  int32_t gamma = -1, beta = -1;

 private:
  TensorT<Real> x_;
  std::vector<Real> mean_, rstd_;
};

enum class Activation { kRelu, kGelu };

template <typename Real>
void activation_forward(const TensorT<Real>& x, TensorT<Real>& y, Activation act);
template <typename Real>
void activation_backward(const TensorT<Real>& x, const TensorT<Real>& dy, TensorT<Real>& dx,
                         Activation act);

// Row-wise softmax; dx convention follows y = softmax(x) with dx depending
// only on (y, dy).
template <typename Real>
void softmax_rows(TensorT<Real>& x);
template <typename Real>
void softmax_rows_backward(const TensorT<Real>& y, const TensorT<Real>& dy, TensorT<Real>& dx);

// Multi-head attention. With block_size == 0 attention is dense over the
// whole sequence; with block_size > 0 (requires q == kv token count,
// divisible) attention is restricted to consecutive blocks, which implements
// the windowed attention of the upsampler.
template <typename Real>
class MultiHeadAttentionT {
 public:
  void init(ParamStoreT<Real>& ps, const std::string& name, int64_t dim, int heads, Rng& rng,
            double out_proj_std);
  TensorT<Real> forward(ParamStoreT<Real>& ps, const TensorT<Real>& q_tokens,
                        const TensorT<Real>& kv_tokens, int64_t block_size = 0);
  // Returns (d_q_tokens, d_kv_tokens). For self-attention callers add both.
  std::pair<TensorT<Real>, TensorT<Real>> backward(ParamStoreT<Real>& ps,
                                                   const TensorT<Real>& dy);

  LinearT<Real> q, k, v, o;
  int heads = 1;

  // Row-stochastic attention maps from the last forward, head-major
  // [heads][nq, nk_block...]; exposed for tests.
  const std::vector<TensorT<Real>>& attention() const { return attn_; }

 private:
  std::vector<TensorT<Real>> qh_, kh_, vh_, attn_;
  int64_t nq_ = 0, nk_ = 0, block_ = 0;
};

// Two-layer MLP: in -> hidden -> out with an activation in between.
template <typename Real>
class MlpT {
 public:
  void init(ParamStoreT<Real>& ps, const std::string& name, int64_t in, int64_t hidden, int64_t out,
            Activation act, Rng& rng, double w_std, double last_std);
  TensorT<Real> forward(ParamStoreT<Real>& ps, const TensorT<Real>& x);
  TensorT<Real> backward(ParamStoreT<Real>& ps, const TensorT<Real>& dy);

  LinearT<Real> fc1, fc2;
  Activation act = Activation::kGelu;

 private:
  TensorT<Real> h_pre_, h_act_;
};

// Strided p x p patch embedding: maps [v, h, w, c] -> tokens [v*(h/p)*(w/p), d]
// as a gather of each patch's pixels followed by a linear projection.
template <typename Real>
class PatchEmbedT {
 public:
  void init(ParamStoreT<Real>& ps, const std::string& name, int64_t channels, int patch,
            int64_t dim, Rng& rng);
  TensorT<Real> forward(ParamStoreT<Real>& ps, const TensorT<Real>& maps, int v, int h, int w);
  // d_maps (optional out) gets the gradient w.r.t. the input maps.
  TensorT<Real> backward(ParamStoreT<Real>& ps, const TensorT<Real>& dy, TensorT<Real>* d_maps);

  LinearT<Real> proj;
  int patch = 8;
  int64_t channels = 0;

 private:
  int v_ = 0, h_ = 0, w_ = 0;
};

// Bilinear resampling of an [h_in, w_in, c] plane stack to [h_out, w_out, c].
// Output pixel centers are mapped into source pixel-center coordinates as
// u = (x + 0.5) * w_in / w_out - 0.5 (and likewise for rows), then sampled
// with edge-clamped bilinear weights.
template <typename Real>
void grid_resample_forward(const Real* in, int h_in, int w_in, int c, Real* out, int h_out,
                           int w_out);
template <typename Real>
void grid_resample_backward(const Real* d_out, int h_in, int w_in, int c, Real* d_in_acc,
                            int h_out, int w_out);

}  // namespace gsa
