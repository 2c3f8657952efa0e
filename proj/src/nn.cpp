#include "gsavatar/nn.hpp"

#include <algorithm>
#include <cmath>

#include "gsavatar/parallel.hpp"

namespace gsa {

namespace {
constexpr int64_t kNBlock = 256;  // column blocking for the axpy kernel
}

template <typename Real>
void matmul(const Real* a, const Real* b, Real* c, int64_t m, int64_t k, int64_t n,
            bool accumulate) {
  parallel_for(m, [&](int64_t r0, int64_t r1) {
    for (int64_t j0 = 0; j0 < n; j0 += kNBlock) {
      const int64_t jw = std::min(kNBlock, n - j0);
      for (int64_t i = r0; i < r1; ++i) {
        Real* __restrict crow = c + i * n + j0;
        if (!accumulate) std::fill(crow, crow + jw, Real(0));
        const Real* __restrict arow = a + i * k;
        for (int64_t kk = 0; kk < k; ++kk) {
          const Real aik = arow[kk];
          const Real* __restrict brow = b + kk * n + j0;
          for (int64_t j = 0; j < jw; ++j) crow[j] += aik * brow[j];
        }
      }
    }
  });
}

template <typename Real>
void matmul_nt(const Real* a, const Real* bt, Real* c, int64_t m, int64_t k, int64_t n,
               bool accumulate) {
  // Transpose bt once, then reuse the streaming kernel; the transpose is
  // O(k n) against the O(m k n) product.
  std::vector<Real> b(static_cast<size_t>(k) * n);
  for (int64_t j = 0; j < n; ++j)
    for (int64_t kk = 0; kk < k; ++kk) b[kk * n + j] = bt[j * k + kk];
  matmul(a, b.data(), c, m, k, n, accumulate);
}

template <typename Real>
void matmul_tn(const Real* at, const Real* b, Real* c, int64_t m, int64_t k, int64_t n,
               bool accumulate) {
  std::vector<Real> a(static_cast<size_t>(m) * k);
  for (int64_t kk = 0; kk < k; ++kk)
    for (int64_t i = 0; i < m; ++i) a[i * k + kk] = at[kk * m + i];
  matmul(a.data(), b, c, m, k, n, accumulate);
}

template <typename Real>
int adam_step(ParamStoreT<Real>& store, const AdamConfig& cfg) {
  int skipped = 0;
  for (auto& e : store.entries) {
    if (!e.grad.all_finite()) {
      ++skipped;
      ++store.nonfinite_skips;
      continue;
    }
    e.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(e.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(e.t));
    const int64_t n = e.value.numel();
    Real* p = e.value.ptr();
    Real* m = e.m.ptr();
    Real* v = e.v.ptr();
    const Real* g = e.grad.ptr();
    parallel_for(n, [&](int64_t b, int64_t ee) {
      for (int64_t i = b; i < ee; ++i) {
        const double gi = double(g[i]);
        const double mi = cfg.beta1 * double(m[i]) + (1.0 - cfg.beta1) * gi;
        const double vi = cfg.beta2 * double(v[i]) + (1.0 - cfg.beta2) * gi * gi;
        m[i] = Real(mi);
        v[i] = Real(vi);
        p[i] = Real(double(p[i]) - cfg.lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps));
      }
    });
  }
  return skipped;
}

template <typename Real>
void init_trunc_normal(TensorT<Real>& t, Rng& rng, double stddev) {
  for (auto& v : t.data) {
    double x;
    do {
      x = rng.normal();
    } while (std::abs(x) > 2.0);
    v = Real(x * stddev);
  }
}

// ---------------------------------------------------------------------------

template <typename Real>
void LinearT<Real>::init(ParamStoreT<Real>& ps, const std::string& name, int64_t in, int64_t out,
                         Rng& rng, double w_std) {
  w = ps.add(name + ".w", {out, in});
  b = ps.add(name + ".b", {out});
  if (w_std > 0) init_trunc_normal(ps[w].value, rng, w_std);
}

template <typename Real>
TensorT<Real> LinearT<Real>::forward(ParamStoreT<Real>& ps, const TensorT<Real>& x) {
  const int64_t in = ps[w].value.dim(1);
  const int64_t out = ps[w].value.dim(0);
  if (x.numel() % in != 0) throw std::invalid_argument("linear: input width mismatch");
  const int64_t rows = x.numel() / in;
  x_ = x;
  TensorT<Real> y({rows, out});
  matmul_nt(x.ptr(), ps[w].value.ptr(), y.ptr(), rows, in, out);
  const Real* bias = ps[b].value.ptr();
  for (int64_t r = 0; r < rows; ++r) {
    Real* yr = y.ptr() + r * out;
    for (int64_t j = 0; j < out; ++j) yr[j] += bias[j];
  }
  return y;
}

template <typename Real>
TensorT<Real> LinearT<Real>::backward(ParamStoreT<Real>& ps, const TensorT<Real>& dy) {
  const int64_t in = ps[w].value.dim(1);
  const int64_t out = ps[w].value.dim(0);
  const int64_t rows = dy.numel() / out;
  // dW += dy^T x, db += column sums, dx = dy W.
  matmul_tn(dy.ptr(), x_.ptr(), ps[w].grad.ptr(), out, rows, in, /*accumulate=*/true);
  Real* db = ps[b].grad.ptr();
  for (int64_t r = 0; r < rows; ++r) {
    const Real* dyr = dy.ptr() + r * out;
    for (int64_t j = 0; j < out; ++j) db[j] += dyr[j];
  }
  TensorT<Real> dx({rows, in});
  matmul(dy.ptr(), ps[w].value.ptr(), dx.ptr(), rows, out, in);
  return dx;
}

template <typename Real>
void LayerNormT<Real>::init(ParamStoreT<Real>& ps, const std::string& name, int64_t dim) {
  gamma = ps.add(name + ".gamma", {dim});
  beta = ps.add(name + ".beta", {dim});
  for (auto& v : ps[gamma].value.data) v = Real(1);
}

template <typename Real>
TensorT<Real> LayerNormT<Real>::forward(ParamStoreT<Real>& ps, const TensorT<Real>& x) {
  const int64_t dim = ps[gamma].value.numel();
  const int64_t rows = x.numel() / dim;
  constexpr double kEps = 1e-5;
  x_ = x;
  mean_.resize(rows);
  rstd_.resize(rows);
  TensorT<Real> y(x.shape);
  const Real* gp = ps[gamma].value.ptr();
  const Real* bp = ps[beta].value.ptr();
  for (int64_t r = 0; r < rows; ++r) {
    const Real* xr = x.ptr() + r * dim;
    Real* yr = y.ptr() + r * dim;
    double mu = 0;
    for (int64_t j = 0; j < dim; ++j) mu += double(xr[j]);
    mu /= double(dim);
    double var = 0;
    for (int64_t j = 0; j < dim; ++j) {
      const double d = double(xr[j]) - mu;
      var += d * d;
    }
    var /= double(dim);
    const double rstd = 1.0 / std::sqrt(var + kEps);
    mean_[r] = Real(mu);
    rstd_[r] = Real(rstd);
    for (int64_t j = 0; j < dim; ++j)
      yr[j] = Real((double(xr[j]) - mu) * rstd) * gp[j] + bp[j];
  }
  return y;
}

template <typename Real>
TensorT<Real> LayerNormT<Real>::backward(ParamStoreT<Real>& ps, const TensorT<Real>& dy) {
  const int64_t dim = ps[gamma].value.numel();
  const int64_t rows = dy.numel() / dim;
  TensorT<Real> dx(dy.shape);
  const Real* gp = ps[gamma].value.ptr();
  Real* dg = ps[gamma].grad.ptr();
  Real* db = ps[beta].grad.ptr();
  for (int64_t r = 0; r < rows; ++r) {
    const Real* xr = x_.ptr() + r * dim;
    const Real* dyr = dy.ptr() + r * dim;
    Real* dxr = dx.ptr() + r * dim;
    const double mu = double(mean_[r]);
    const double rstd = double(rstd_[r]);
    double s1 = 0, s2 = 0;
    for (int64_t j = 0; j < dim; ++j) {
      const double xhat = (double(xr[j]) - mu) * rstd;
      const double dxhat = double(dyr[j]) * double(gp[j]);
      dg[j] += Real(double(dyr[j]) * xhat);
      db[j] += dyr[j];
      s1 += dxhat;
      s2 += dxhat * xhat;
    }
    s1 /= double(dim);
    s2 /= double(dim);
    for (int64_t j = 0; j < dim; ++j) {
      const double xhat = (double(xr[j]) - mu) * rstd;
      const double dxhat = double(dyr[j]) * double(gp[j]);
      dxr[j] = Real(rstd * (dxhat - s1 - xhat * s2));
    }
  }
  return dx;
}

template <typename Real>
void activation_forward(const TensorT<Real>& x, TensorT<Real>& y, Activation act) {
  y = TensorT<Real>(x.shape);
  const int64_t n = x.numel();
  if (act == Activation::kRelu) {
    for (int64_t i = 0; i < n; ++i) y.data[i] = x.data[i] > Real(0) ? x.data[i] : Real(0);
  } else {
    for (int64_t i = 0; i < n; ++i) {
      const double v = double(x.data[i]);
      y.data[i] = Real(0.5 * v * (1.0 + std::erf(v * 0.70710678118654752440)));
    }
  }
}

template <typename Real>
void activation_backward(const TensorT<Real>& x, const TensorT<Real>& dy, TensorT<Real>& dx,
                         Activation act) {
  dx = TensorT<Real>(x.shape);
  const int64_t n = x.numel();
  if (act == Activation::kRelu) {
    for (int64_t i = 0; i < n; ++i)
      dx.data[i] = x.data[i] > Real(0) ? dy.data[i] : Real(0);
  } else {
    constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    for (int64_t i = 0; i < n; ++i) {
      const double v = double(x.data[i]);
      const double cdf = 0.5 * (1.0 + std::erf(v * 0.70710678118654752440));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      dx.data[i] = Real(double(dy.data[i]) * (cdf + v * pdf));
    }
  }
}

template <typename Real>
void softmax_rows(TensorT<Real>& x) {
  const int64_t cols = x.shape.back();
  const int64_t rows = x.numel() / cols;
  for (int64_t r = 0; r < rows; ++r) {
    Real* xr = x.ptr() + r * cols;
    Real mx = xr[0];
    for (int64_t j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
    double sum = 0;
    for (int64_t j = 0; j < cols; ++j) {
      const double e = std::exp(double(xr[j]) - double(mx));
      xr[j] = Real(e);
      sum += e;
    }
    const double inv = 1.0 / sum;
    for (int64_t j = 0; j < cols; ++j) xr[j] = Real(double(xr[j]) * inv);
  }
}

template <typename Real>
void softmax_rows_backward(const TensorT<Real>& y, const TensorT<Real>& dy, TensorT<Real>& dx) {
  dx = TensorT<Real>(y.shape);
  const int64_t cols = y.shape.back();
  const int64_t rows = y.numel() / cols;
  for (int64_t r = 0; r < rows; ++r) {
    const Real* yr = y.ptr() + r * cols;
    const Real* dyr = dy.ptr() + r * cols;
    Real* dxr = dx.ptr() + r * cols;
    double dot = 0;
    for (int64_t j = 0; j < cols; ++j) dot += double(yr[j]) * double(dyr[j]);
    for (int64_t j = 0; j < cols; ++j)
      dxr[j] = Real(double(yr[j]) * (double(dyr[j]) - dot));
  }
}

// ---------------------------------------------------------------------------

template <typename Real>
void MultiHeadAttentionT<Real>::init(ParamStoreT<Real>& ps, const std::string& name, int64_t dim,
                                     int n_heads, Rng& rng, double out_proj_std) {
  if (dim % n_heads != 0) throw std::invalid_argument("mha: dim not divisible by heads");
  heads = n_heads;
  q.init(ps, name + ".q", dim, dim, rng, 0.02);
  k.init(ps, name + ".k", dim, dim, rng, 0.02);
  v.init(ps, name + ".v", dim, dim, rng, 0.02);
  o.init(ps, name + ".o", dim, dim, rng, out_proj_std);
}

template <typename Real>
TensorT<Real> MultiHeadAttentionT<Real>::forward(ParamStoreT<Real>& ps,
                                                 const TensorT<Real>& q_tokens,
                                                 const TensorT<Real>& kv_tokens,
                                                 int64_t block_size) {
  const int64_t dim = ps[q.w].value.dim(0);
  const int64_t dh = dim / heads;
  nq_ = q_tokens.numel() / dim;
  nk_ = kv_tokens.numel() / dim;
  block_ = block_size;
  if (block_size > 0 && (nq_ != nk_ || nq_ % block_size != 0))
    throw std::invalid_argument("mha: bad block size");

  TensorT<Real> qp = q.forward(ps, q_tokens);
  TensorT<Real> kp = k.forward(ps, kv_tokens);
  TensorT<Real> vp = v.forward(ps, kv_tokens);

  qh_.assign(heads, TensorT<Real>({nq_, dh}));
  kh_.assign(heads, TensorT<Real>({nk_, dh}));
  vh_.assign(heads, TensorT<Real>({nk_, dh}));
  const int64_t cols = block_size > 0 ? block_size : nk_;
  attn_.assign(heads, TensorT<Real>({nq_, cols}));

  for (int h = 0; h < heads; ++h) {
    for (int64_t r = 0; r < nq_; ++r)
      std::copy_n(qp.ptr() + r * dim + h * dh, dh, qh_[h].ptr() + r * dh);
    for (int64_t r = 0; r < nk_; ++r) {
      std::copy_n(kp.ptr() + r * dim + h * dh, dh, kh_[h].ptr() + r * dh);
      std::copy_n(vp.ptr() + r * dim + h * dh, dh, vh_[h].ptr() + r * dh);
    }
  }

  const Real scale = Real(1.0 / std::sqrt(double(dh)));
  TensorT<Real> concat({nq_, dim});
  const int64_t blocks = block_size > 0 ? nq_ / block_size : 1;
  const int64_t bq = block_size > 0 ? block_size : nq_;
  const int64_t bk = block_size > 0 ? block_size : nk_;
  for (int h = 0; h < heads; ++h) {
    TensorT<Real> outh({nq_, dh});
    for (int64_t blk = 0; blk < blocks; ++blk) {
      Real* s = attn_[h].ptr() + blk * bq * cols;
      const Real* qb = qh_[h].ptr() + blk * bq * dh;
      const Real* kb = kh_[h].ptr() + blk * bk * dh;
      const Real* vb = vh_[h].ptr() + blk * bk * dh;
      matmul_nt(qb, kb, s, bq, dh, bk);
      for (int64_t i = 0; i < bq * bk; ++i) s[i] *= scale;
      TensorT<Real> srows({bq, bk});
      std::copy_n(s, bq * bk, srows.ptr());
      softmax_rows(srows);
      std::copy_n(srows.ptr(), bq * bk, s);
      matmul(s, vb, outh.ptr() + blk * bq * dh, bq, bk, dh);
    }
    for (int64_t r = 0; r < nq_; ++r)
      std::copy_n(outh.ptr() + r * dh, dh, concat.ptr() + r * dim + h * dh);
  }
  return o.forward(ps, concat);
}

template <typename Real>
std::pair<TensorT<Real>, TensorT<Real>> MultiHeadAttentionT<Real>::backward(
    ParamStoreT<Real>& ps, const TensorT<Real>& dy) {
  const int64_t dim = ps[q.w].value.dim(0);
  const int64_t dh = dim / heads;
  const Real scale = Real(1.0 / std::sqrt(double(dh)));
  TensorT<Real> d_concat = o.backward(ps, dy);

  TensorT<Real> dq({nq_, dim}), dk({nk_, dim}), dv({nk_, dim});
  const int64_t blocks = block_ > 0 ? nq_ / block_ : 1;
  const int64_t bq = block_ > 0 ? block_ : nq_;
  const int64_t bk = block_ > 0 ? block_ : nk_;
  const int64_t cols = block_ > 0 ? block_ : nk_;
  for (int h = 0; h < heads; ++h) {
    TensorT<Real> d_outh({nq_, dh});
    for (int64_t r = 0; r < nq_; ++r)
      std::copy_n(d_concat.ptr() + r * dim + h * dh, dh, d_outh.ptr() + r * dh);
    TensorT<Real> dqh({nq_, dh}), dkh({nk_, dh}), dvh({nk_, dh});
    for (int64_t blk = 0; blk < blocks; ++blk) {
      const Real* attn = attn_[h].ptr() + blk * bq * cols;
      const Real* qb = qh_[h].ptr() + blk * bq * dh;
      const Real* kb = kh_[h].ptr() + blk * bk * dh;
      const Real* vb = vh_[h].ptr() + blk * bk * dh;
      const Real* dob = d_outh.ptr() + blk * bq * dh;
      // dV = A^T dOut; dA = dOut V^T.
      matmul_tn(attn, dob, dvh.ptr() + blk * bk * dh, bk, bq, dh);
      TensorT<Real> da({bq, bk});
      matmul_nt(dob, vb, da.ptr(), bq, dh, bk);
      TensorT<Real> yb({bq, bk});
      std::copy_n(attn, bq * bk, yb.ptr());
      TensorT<Real> ds;
      softmax_rows_backward(yb, da, ds);
      for (auto& vl : ds.data) vl *= scale;
      matmul(ds.ptr(), kb, dqh.ptr() + blk * bq * dh, bq, bk, dh);
      matmul_tn(ds.ptr(), qb, dkh.ptr() + blk * bk * dh, bk, bq, dh);
    }
    for (int64_t r = 0; r < nq_; ++r)
      std::copy_n(dqh.ptr() + r * dh, dh, dq.ptr() + r * dim + h * dh);
    for (int64_t r = 0; r < nk_; ++r) {
      std::copy_n(dkh.ptr() + r * dh, dh, dk.ptr() + r * dim + h * dh);
      std::copy_n(dvh.ptr() + r * dh, dh, dv.ptr() + r * dim + h * dh);
    }
  }
  TensorT<Real> d_q_tokens = q.backward(ps, dq);
  TensorT<Real> d_kv = k.backward(ps, dk);
  TensorT<Real> d_kv2 = v.backward(ps, dv);
  for (int64_t i = 0; i < d_kv.numel(); ++i) d_kv.data[i] += d_kv2.data[i];
  return {std::move(d_q_tokens), std::move(d_kv)};
}

template <typename Real>
void MlpT<Real>::init(ParamStoreT<Real>& ps, const std::string& name, int64_t in, int64_t hidden,
                      int64_t out, Activation a, Rng& rng, double w_std, double last_std) {
  act = a;
  fc1.init(ps, name + ".fc1", in, hidden, rng, w_std);
  fc2.init(ps, name + ".fc2", hidden, out, rng, last_std);
}

template <typename Real>
TensorT<Real> MlpT<Real>::forward(ParamStoreT<Real>& ps, const TensorT<Real>& x) {
  h_pre_ = fc1.forward(ps, x);
  activation_forward(h_pre_, h_act_, act);
  return fc2.forward(ps, h_act_);
}

template <typename Real>
TensorT<Real> MlpT<Real>::backward(ParamStoreT<Real>& ps, const TensorT<Real>& dy) {
  TensorT<Real> dh_act = fc2.backward(ps, dy);
  TensorT<Real> dh_pre;
  activation_backward(h_pre_, dh_act, dh_pre, act);
  return fc1.backward(ps, dh_pre);
}

template <typename Real>
void PatchEmbedT<Real>::init(ParamStoreT<Real>& ps, const std::string& name, int64_t ch, int p,
                             int64_t dim, Rng& rng) {
  patch = p;
  channels = ch;
  proj.init(ps, name + ".proj", ch * p * p, dim, rng, 0.02);
}

template <typename Real>
TensorT<Real> PatchEmbedT<Real>::forward(ParamStoreT<Real>& ps, const TensorT<Real>& maps, int v,
                                         int h, int w) {
  if (h % patch != 0 || w % patch != 0)
    throw std::invalid_argument("patch_embed: resolution not divisible by patch size");
  v_ = v;
  h_ = h;
  w_ = w;
  const int hp = h / patch, wp = w / patch;
  const int64_t row_len = channels * patch * patch;
  TensorT<Real> rows({int64_t(v) * hp * wp, row_len});
  const Real* src = maps.ptr();
  Real* dst = rows.ptr();
  for (int vi = 0; vi < v; ++vi)
    for (int py = 0; py < hp; ++py)
      for (int px = 0; px < wp; ++px) {
        for (int dy = 0; dy < patch; ++dy)
          for (int dx = 0; dx < patch; ++dx) {
            const size_t off =
                ((static_cast<size_t>(vi) * h + py * patch + dy) * w + px * patch + dx) * channels;
            std::copy_n(src + off, channels, dst + (dy * patch + dx) * channels);
          }
        dst += row_len;
      }
  return proj.forward(ps, rows);
}

template <typename Real>
TensorT<Real> PatchEmbedT<Real>::backward(ParamStoreT<Real>& ps, const TensorT<Real>& dy,
                                          TensorT<Real>* d_maps) {
  TensorT<Real> d_rows = proj.backward(ps, dy);
  if (d_maps) {
    *d_maps = TensorT<Real>({int64_t(v_), int64_t(h_), int64_t(w_), channels});
    const int hp = h_ / patch, wp = w_ / patch;
    const int64_t row_len = channels * patch * patch;
    const Real* src = d_rows.ptr();
    Real* dst = d_maps->ptr();
    for (int vi = 0; vi < v_; ++vi)
      for (int py = 0; py < hp; ++py)
        for (int px = 0; px < wp; ++px) {
          for (int dy2 = 0; dy2 < patch; ++dy2)
            for (int dx = 0; dx < patch; ++dx) {
              const size_t off =
                  ((static_cast<size_t>(vi) * h_ + py * patch + dy2) * w_ + px * patch + dx) *
                  channels;
              const Real* r = src + (dy2 * patch + dx) * channels;
              for (int64_t c = 0; c < channels; ++c) dst[off + c] += r[c];
            }
          src += row_len;
        }
  }
  return d_rows;
}

template <typename Real>
void grid_resample_forward(const Real* in, int h_in, int w_in, int c, Real* out, int h_out,
                           int w_out) {
  for (int yo = 0; yo < h_out; ++yo) {
    const double sy = (yo + 0.5) * double(h_in) / double(h_out) - 0.5;
    const int y0 = static_cast<int>(std::floor(sy));
    const double fy = sy - y0;
    const int y0c = std::clamp(y0, 0, h_in - 1);
    const int y1c = std::clamp(y0 + 1, 0, h_in - 1);
    for (int xo = 0; xo < w_out; ++xo) {
      const double sx = (xo + 0.5) * double(w_in) / double(w_out) - 0.5;
      const int x0 = static_cast<int>(std::floor(sx));
      const double fx = sx - x0;
      const int x0c = std::clamp(x0, 0, w_in - 1);
      const int x1c = std::clamp(x0 + 1, 0, w_in - 1);
      const double w00 = (1 - fy) * (1 - fx), w01 = (1 - fy) * fx;
      const double w10 = fy * (1 - fx), w11 = fy * fx;
      const Real* p00 = in + (static_cast<size_t>(y0c) * w_in + x0c) * c;
      const Real* p01 = in + (static_cast<size_t>(y0c) * w_in + x1c) * c;
      const Real* p10 = in + (static_cast<size_t>(y1c) * w_in + x0c) * c;
      const Real* p11 = in + (static_cast<size_t>(y1c) * w_in + x1c) * c;
      Real* op = out + (static_cast<size_t>(yo) * w_out + xo) * c;
      for (int ch = 0; ch < c; ++ch)
        op[ch] = Real(w00 * double(p00[ch]) + w01 * double(p01[ch]) + w10 * double(p10[ch]) +
                      w11 * double(p11[ch]));
    }
  }
}

template <typename Real>
void grid_resample_backward(const Real* d_out, int h_in, int w_in, int c, Real* d_in_acc,
                            int h_out, int w_out) {
  for (int yo = 0; yo < h_out; ++yo) {
    const double sy = (yo + 0.5) * double(h_in) / double(h_out) - 0.5;
    const int y0 = static_cast<int>(std::floor(sy));
    const double fy = sy - y0;
    const int y0c = std::clamp(y0, 0, h_in - 1);
    const int y1c = std::clamp(y0 + 1, 0, h_in - 1);
    for (int xo = 0; xo < w_out; ++xo) {
      const double sx = (xo + 0.5) * double(w_in) / double(w_out) - 0.5;
      const int x0 = static_cast<int>(std::floor(sx));
      const double fx = sx - x0;
      const int x0c = std::clamp(x0, 0, w_in - 1);
      const int x1c = std::clamp(x0 + 1, 0, w_in - 1);
      const double w00 = (1 - fy) * (1 - fx), w01 = (1 - fy) * fx;
      const double w10 = fy * (1 - fx), w11 = fy * fx;
      const Real* dp = d_out + (static_cast<size_t>(yo) * w_out + xo) * c;
      Real* g00 = d_in_acc + (static_cast<size_t>(y0c) * w_in + x0c) * c;
      Real* g01 = d_in_acc + (static_cast<size_t>(y0c) * w_in + x1c) * c;
      Real* g10 = d_in_acc + (static_cast<size_t>(y1c) * w_in + x0c) * c;
      Real* g11 = d_in_acc + (static_cast<size_t>(y1c) * w_in + x1c) * c;
      for (int ch = 0; ch < c; ++ch) {
        g00[ch] += Real(w00 * double(dp[ch]));
        g01[ch] += Real(w01 * double(dp[ch]));
        g10[ch] += Real(w10 * double(dp[ch]));
        g11[ch] += Real(w11 * double(dp[ch]));
      }
    }
  }
}

#define GSA_NN_INSTANTIATE(Real)                                                              \
  template void matmul(const Real*, const Real*, Real*, int64_t, int64_t, int64_t, bool);    \
  template void matmul_nt(const Real*, const Real*, Real*, int64_t, int64_t, int64_t, bool); \
  template void matmul_tn(const Real*, const Real*, Real*, int64_t, int64_t, int64_t, bool); \
  template int adam_step(ParamStoreT<Real>&, const AdamConfig&);                              \
  template void init_trunc_normal(TensorT<Real>&, Rng&, double);                             \
  template class LinearT<Real>;                                                               \
  template class LayerNormT<Real>;                                                            \
  template void activation_forward(const TensorT<Real>&, TensorT<Real>&, Activation);        \
  template void activation_backward(const TensorT<Real>&, const TensorT<Real>&,              \
                                    TensorT<Real>&, Activation);                             \
  template void softmax_rows(TensorT<Real>&);                                                 \
  template void softmax_rows_backward(const TensorT<Real>&, const TensorT<Real>&,            \
                                      TensorT<Real>&);                                       \
  template class MultiHeadAttentionT<Real>;                                                   \
  template class MlpT<Real>;                                                                  \
  template class PatchEmbedT<Real>;                                                           \
  template void grid_resample_forward(const Real*, int, int, int, Real*, int, int);          \
  template void grid_resample_backward(const Real*, int, int, int, Real*, int, int);

GSA_NN_INSTANTIATE(float)
GSA_NN_INSTANTIATE(double)

}  // namespace gsa
