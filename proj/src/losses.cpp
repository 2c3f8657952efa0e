#include "gsavatar/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gsa {
namespace {

constexpr int kWindow = 11;
constexpr int kHalf = kWindow / 2;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

template <typename Real>
const Real* window_taps() {
  static const std::vector<Real> taps = [] {
    std::vector<Real> t(kWindow);
    double sum = 0;
    for (int k = 0; k < kWindow; ++k) {
      const double d = k - kHalf;
      const double w = std::exp(-d * d / (2.0 * kSigma * kSigma));
      t[k] = Real(w);
      sum += w;
    }
    for (auto& v : t) v = Real(double(v) / sum);
    return t;
  }();
  return taps.data();
}

// Symmetric reflection: -1 -> 0, -2 -> 1, n -> n-1, n+1 -> n-2.
inline int reflect(int i, int n) {
  if (i < 0) return -i - 1;
  if (i >= n) return 2 * n - i - 1;
  return i;
}

// Separable 11-tap filter with reflective borders, single channel plane.
template <typename Real>
void filter2(const Real* in, Real* out, Real* tmp, int w, int h) {
  const Real* taps = window_taps<Real>();
  for (int y = 0; y < h; ++y) {
    const Real* row = in + static_cast<size_t>(y) * w;
    Real* trow = tmp + static_cast<size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      Real acc = 0;
      for (int k = 0; k < kWindow; ++k) acc += taps[k] * row[reflect(x + k - kHalf, w)];
      trow[x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Real acc = 0;
      for (int k = 0; k < kWindow; ++k)
        acc += taps[k] * tmp[static_cast<size_t>(reflect(y + k - kHalf, h)) * w + x];
      out[static_cast<size_t>(y) * w + x] = acc;
    }
  }
}

// Adjoint of filter2 (scatter through the same reflected indices).
template <typename Real>
void filter2_adjoint(const Real* in, Real* out, Real* tmp, int w, int h) {
  const Real* taps = window_taps<Real>();
  std::fill(tmp, tmp + static_cast<size_t>(w) * h, Real(0));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Real v = in[static_cast<size_t>(y) * w + x];
      if (v == Real(0)) continue;
      for (int k = 0; k < kWindow; ++k)
        tmp[static_cast<size_t>(reflect(y + k - kHalf, h)) * w + x] += taps[k] * v;
    }
  std::fill(out, out + static_cast<size_t>(w) * h, Real(0));
  for (int y = 0; y < h; ++y) {
    const Real* trow = tmp + static_cast<size_t>(y) * w;
    Real* orow = out + static_cast<size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      const Real v = trow[x];
      if (v == Real(0)) continue;
      for (int k = 0; k < kWindow; ++k) orow[reflect(x + k - kHalf, w)] += taps[k] * v;
    }
  }
}

template <typename Real>
struct SsimPlanes {
  std::vector<Real> mu1, mu2, t11, t22, t12;
};

// Filters one channel plane of both images and returns the SSIM map sum.
// When grad_a is non-null, accumulates the gradient of sum(ssim_map) w.r.t. a.
template <typename Real>
double ssim_plane(const Real* a, const Real* b, int w, int h, Real* grad_a) {
  const size_t n = static_cast<size_t>(w) * h;
  SsimPlanes<Real> p;
  p.mu1.resize(n);
  p.mu2.resize(n);
  p.t11.resize(n);
  p.t22.resize(n);
  p.t12.resize(n);
  std::vector<Real> tmp(n), prod(n);
  filter2(a, p.mu1.data(), tmp.data(), w, h);
  filter2(b, p.mu2.data(), tmp.data(), w, h);
  for (size_t i = 0; i < n; ++i) prod[i] = a[i] * a[i];
  filter2(prod.data(), p.t11.data(), tmp.data(), w, h);
  for (size_t i = 0; i < n; ++i) prod[i] = b[i] * b[i];
  filter2(prod.data(), p.t22.data(), tmp.data(), w, h);
  for (size_t i = 0; i < n; ++i) prod[i] = a[i] * b[i];
  filter2(prod.data(), p.t12.data(), tmp.data(), w, h);

  double sum = 0;
  std::vector<Real> g_mu1, g_t11, g_t12;
  if (grad_a) {
    g_mu1.assign(n, Real(0));
    g_t11.assign(n, Real(0));
    g_t12.assign(n, Real(0));
  }
  for (size_t i = 0; i < n; ++i) {
    const Real mu1 = p.mu1[i], mu2 = p.mu2[i];
    const Real s11 = p.t11[i] - mu1 * mu1;
    const Real s22 = p.t22[i] - mu2 * mu2;
    const Real s12 = p.t12[i] - mu1 * mu2;
    const Real n1 = 2 * mu1 * mu2 + Real(kC1);
    const Real n2 = 2 * s12 + Real(kC2);
    const Real d1 = mu1 * mu1 + mu2 * mu2 + Real(kC1);
    const Real d2 = s11 + s22 + Real(kC2);
    const Real inv = Real(1) / (d1 * d2);
    sum += double(n1 * n2 * inv);
    if (grad_a) {
      const Real df_dmu1 = (2 * mu2 * n2 - 2 * mu1 * n1 * n2 / d1) * inv;
      const Real df_ds11 = -n1 * n2 * inv / d2;
      const Real df_ds12 = 2 * n1 * inv;
      g_mu1[i] = df_dmu1 - 2 * mu1 * df_ds11 - mu2 * df_ds12;
      g_t11[i] = df_ds11;
      g_t12[i] = df_ds12;
    }
  }
  if (grad_a) {
    std::vector<Real> adj(n);
    filter2_adjoint(g_mu1.data(), adj.data(), tmp.data(), w, h);
    for (size_t i = 0; i < n; ++i) grad_a[i] += adj[i];
    filter2_adjoint(g_t11.data(), adj.data(), tmp.data(), w, h);
    for (size_t i = 0; i < n; ++i) grad_a[i] += 2 * a[i] * adj[i];
    filter2_adjoint(g_t12.data(), adj.data(), tmp.data(), w, h);
    for (size_t i = 0; i < n; ++i) grad_a[i] += b[i] * adj[i];
  }
  return sum;
}

template <typename Real>
void deinterleave(const std::vector<Real>& img, int c, int channels, std::vector<Real>& plane) {
  const size_t n = img.size() / channels;
  plane.resize(n);
  for (size_t i = 0; i < n; ++i) plane[i] = img[i * channels + c];
}

}  // namespace

template <typename Real>
Real l1_loss(const std::vector<Real>& a, const std::vector<Real>& b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("l1_loss: shape mismatch");
  double acc = 0;
  for (size_t i = 0; i < a.size(); ++i) acc += std::abs(double(a[i]) - double(b[i]));
  return Real(acc / double(a.size()));
}

template <typename Real>
Real ssim(const std::vector<Real>& a, const std::vector<Real>& b, int width, int height,
          int channels) {
  if (a.size() != b.size() || a.size() != static_cast<size_t>(width) * height * channels)
    throw std::invalid_argument("ssim: shape mismatch");
  if (width < kWindow || height < kWindow)
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  std::vector<Real> pa, pb;
  double total = 0;
  for (int c = 0; c < channels; ++c) {
    deinterleave(a, c, channels, pa);
    deinterleave(b, c, channels, pb);
    total += ssim_plane(pa.data(), pb.data(), width, height, static_cast<Real*>(nullptr));
  }
  return Real(total / (double(width) * height * channels));
}

double psnr(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("psnr: shape mismatch");
  double mse = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    mse += d * d;
  }
  mse /= double(a.size());
  if (mse <= 0) return 99.0;
  return std::min(99.0, -10.0 * std::log10(mse));
}

template <typename Real>
Real total_loss(const std::vector<Real>& render, const std::vector<Real>& gt, int width, int height,
                int channels, const LossWeights& w, std::vector<Real>* d_render, Real* l1_term,
                Real* ssim_term) {
  if (render.size() != gt.size() ||
      render.size() != static_cast<size_t>(width) * height * channels)
    throw std::invalid_argument("total_loss: shape mismatch");
  const size_t n = render.size();
  if (d_render) d_render->assign(n, Real(0));

  const Real l1 = l1_loss(render, gt);
  if (d_render && w.l1 != 0) {
    const Real scale = Real(w.l1) / Real(double(n));
    for (size_t i = 0; i < n; ++i) {
      const Real d = render[i] - gt[i];
      (*d_render)[i] += d > 0 ? scale : (d < 0 ? -scale : Real(0));
    }
  }

  Real ssim_val = 0;
  if (w.ssim != 0 || ssim_term) {
    if (width < kWindow || height < kWindow)
      throw std::invalid_argument("total_loss: image smaller than the ssim window");
    std::vector<Real> pa, pb;
    std::vector<Real> grad_plane;
    double sum = 0;
    const double denom = double(width) * height * channels;
    for (int c = 0; c < channels; ++c) {
      deinterleave(render, c, channels, pa);
      deinterleave(gt, c, channels, pb);
      if (d_render && w.ssim != 0) {
        grad_plane.assign(pa.size(), Real(0));
        sum += ssim_plane(pa.data(), pb.data(), width, height, grad_plane.data());
        // d(1 - ssim)/d render, folded with the channel interleave.
        const Real scale = Real(-w.ssim / denom);
        for (size_t i = 0; i < grad_plane.size(); ++i)
          (*d_render)[i * channels + c] += scale * grad_plane[i];
      } else {
        sum += ssim_plane(pa.data(), pb.data(), width, height, static_cast<Real*>(nullptr));
      }
    }
    ssim_val = Real(sum / denom);
  }

  if (l1_term) *l1_term = l1;
  if (ssim_term) *ssim_term = ssim_val;
  return Real(w.l1) * l1 + Real(w.ssim) * (Real(1) - ssim_val);
}

template float l1_loss(const std::vector<float>&, const std::vector<float>&);
template double l1_loss(const std::vector<double>&, const std::vector<double>&);
template float ssim(const std::vector<float>&, const std::vector<float>&, int, int, int);
template double ssim(const std::vector<double>&, const std::vector<double>&, int, int, int);
template float total_loss(const std::vector<float>&, const std::vector<float>&, int, int, int,
                          const LossWeights&, std::vector<float>*, float*, float*);
template double total_loss(const std::vector<double>&, const std::vector<double>&, int, int, int,
                           const LossWeights&, std::vector<double>*, double*, double*);

}  // namespace gsa
