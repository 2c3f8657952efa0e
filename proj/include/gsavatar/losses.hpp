#pragma once

#include <cstdint>
#include <vector>

namespace gsa {

// Photometric loss weights. The lpips slot is carried through configs and
// reports but always contributes zero in this codebase (no perceptual
// network); it exists so schedules mentioning it stay representable.
struct LossWeights {
  double l1 = 0.8;
  double ssim = 0.2;
  double lpips = 0.0;
};

// Mean absolute difference over all pixels and channels.
template <typename Real>
Real l1_loss(const std::vector<Real>& a, const std::vector<Real>& b);

// Mean structural similarity over pixels, computed per channel and averaged.
// 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1,
// symmetric reflective padding at the borders. Inputs are H*W*C row-major
// interleaved. Throws if either spatial dimension is smaller than the window.
template <typename Real>
Real ssim(const std::vector<Real>& a, const std::vector<Real>& b, int width, int height,
          int channels);

// -10 log10(MSE) with peak 1. A zero MSE maps to the 99 dB report cap, and all
// results are clamped to at most 99 dB.
double psnr(const std::vector<float>& a, const std::vector<float>& b);

// w.l1 * L1 + w.ssim * (1 - SSIM); the lpips term is inert. When d_render is
// non-null it receives the analytic gradient with respect to `render`
// (resized to render.size()). Also exposes the individual terms for logging.
template <typename Real>
Real total_loss(const std::vector<Real>& render, const std::vector<Real>& gt, int width, int height,
                int channels, const LossWeights& w, std::vector<Real>* d_render,
                Real* l1_term = nullptr, Real* ssim_term = nullptr);

}  // namespace gsa
