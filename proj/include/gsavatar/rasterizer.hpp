#pragma once

#include <cstdint>
#include <vector>

#include "gsavatar/gaussian_set.hpp"
#include "gsavatar/geometry.hpp"

namespace gsa {

// Fixed rasterization constants. The tile renderer skips per-splat
// contributions below kAlphaCutoff and terminates a pixel once its
// transmittance falls below kTransmittanceStop; the brute-force reference
// applies neither cutoff. Splats are binned with a conservative
// kGatherRadiusSigma * sigma_max circle so that binning never drops a
// contribution the alpha cutoff would keep (alpha >= 1/255 implies the pixel
// lies within sqrt(2 ln 255) ~ 3.33 sigma of the mean).
struct RasterParams {
  static constexpr int kTileSize = 16;
  static constexpr double kAlphaCutoff = 1.0 / 255.0;
  static constexpr double kTransmittanceStop = 1e-4;
  static constexpr double kGatherRadiusSigma = 3.5;
};

template <typename Real>
struct RenderOutputT {
  int width = 0, height = 0;
  std::vector<Real> image;  // H*W*3, row-major RGB
  std::vector<Real> alpha;  // H*W accumulated opacity

  // aux: per-pixel final transmittance and contributing-splat count, used by
  // the backward pass and for diagnostics, plus the alpha-weighted mean
  // camera-space depth (zero where nothing rendered).
  std::vector<Real> transmittance;
  std::vector<int32_t> contrib_count;
  std::vector<Real> depth;

  size_t pixels() const { return static_cast<size_t>(width) * height; }
};

// Tile-based front-to-back alpha compositing of a depth-sorted Gaussian set.
// Depth sort key is (camera-space z, index) so ties are deterministic; output
// is bit-identical across runs and thread counts. An empty set yields the
// background image with alpha 0.
template <typename Real>
RenderOutputT<Real> rasterize(const GaussianSetT<Real>& set, const CameraT<Real>& camera,
                              const Vec3T<Real>& background);

// Testing oracle: every pixel composites every non-culled Gaussian in exact
// global depth order with no alpha cutoff and no transmittance early-stop,
// accumulating in double precision.
template <typename Real>
RenderOutputT<Real> reference_rasterize(const GaussianSetT<Real>& set, const CameraT<Real>& camera,
                                        const Vec3T<Real>& background);

// Adjoint of rasterize for the scalar objective sum(d_image * image). The
// gradients are those of the truncated forward (cutoffs included), so they
// match finite differences of rasterize exactly away from cutoff boundaries.
// `forward_out` must come from rasterize(set, camera, background) with
// identical arguments; a mismatch is reported as std::invalid_argument.
template <typename Real>
GaussianGradientsT<Real> rasterize_backward(const GaussianSetT<Real>& set,
                                            const CameraT<Real>& camera,
                                            const Vec3T<Real>& background,
                                            const std::vector<Real>& d_image,
                                            const RenderOutputT<Real>& forward_out);

}  // namespace gsa
