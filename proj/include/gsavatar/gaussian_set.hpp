#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gsavatar/geometry.hpp"

namespace gsa {

// Structure-of-arrays Gaussian container: one contiguous array per attribute,
// all of common length. source_views is optional (empty or size N); it tags
// each Gaussian with the input view it was spawned from.
template <typename Real>
struct GaussianSetT {
  std::vector<Vec3T<Real>> positions;
  std::vector<Vec3T<Real>> scales;
  std::vector<QuatT<Real>> rotations;
  std::vector<Vec3T<Real>> colors;
  std::vector<Real> opacities;
  std::vector<int32_t> source_views;

  size_t size() const { return positions.size(); }

  void reserve(size_t n) {
    positions.reserve(n);
    scales.reserve(n);
    rotations.reserve(n);
    colors.reserve(n);
    opacities.reserve(n);
  }

  void push(const Gaussian3DT<Real>& g, int32_t source_view = -1) {
    positions.push_back(g.position);
    scales.push_back(g.scale);
    rotations.push_back(g.rotation);
    colors.push_back(g.color);
    opacities.push_back(g.opacity);
    if (source_view >= 0 || !source_views.empty()) {
      source_views.resize(positions.size() - 1, -1);
      source_views.push_back(source_view);
    }
  }

  Gaussian3DT<Real> get(size_t i) const {
    return {positions[i], scales[i], rotations[i], colors[i], opacities[i]};
  }

  void validate() const {
    const size_t n = size();
    if (scales.size() != n || rotations.size() != n || colors.size() != n || opacities.size() != n)
      throw std::invalid_argument("GaussianSet: attribute arrays disagree in length");
    if (!source_views.empty() && source_views.size() != n)
      throw std::invalid_argument("GaussianSet: source_views length mismatch");
  }

  template <typename Other>
  GaussianSetT<Other> cast() const {
    GaussianSetT<Other> out;
    out.reserve(size());
    for (size_t i = 0; i < size(); ++i) {
      const auto g = get(i);
      out.positions.push_back({Other(g.position.x), Other(g.position.y), Other(g.position.z)});
      out.scales.push_back({Other(g.scale.x), Other(g.scale.y), Other(g.scale.z)});
      out.rotations.push_back({Other(g.rotation.w), Other(g.rotation.x), Other(g.rotation.y), Other(g.rotation.z)});
      out.colors.push_back({Other(g.color.x), Other(g.color.y), Other(g.color.z)});
      out.opacities.push_back(Other(g.opacity));
    }
    out.source_views = source_views;
    return out;
  }
};

// d(loss)/d(attribute) with the same shapes as the attribute arrays.
// Entries for culled Gaussians stay zero.
template <typename Real>
struct GaussianGradientsT {
  std::vector<Vec3T<Real>> d_position;
  std::vector<Vec3T<Real>> d_scale;
  std::vector<QuatT<Real>> d_rotation;
  std::vector<Vec3T<Real>> d_color;
  std::vector<Real> d_opacity;

  explicit GaussianGradientsT(size_t n = 0) { resize(n); }

  void resize(size_t n) {
    d_position.assign(n, {});
    d_scale.assign(n, {});
    d_rotation.assign(n, {0, 0, 0, 0});
    d_color.assign(n, {});
    d_opacity.assign(n, Real(0));
  }

  size_t size() const { return d_position.size(); }

  void accumulate(const GaussianGradientsT& o) {
    if (o.size() != size()) throw std::invalid_argument("gradient accumulate: size mismatch");
    for (size_t i = 0; i < size(); ++i) {
      d_position[i] += o.d_position[i];
      d_scale[i] += o.d_scale[i];
      d_rotation[i].w += o.d_rotation[i].w;
      d_rotation[i].x += o.d_rotation[i].x;
      d_rotation[i].y += o.d_rotation[i].y;
      d_rotation[i].z += o.d_rotation[i].z;
      d_color[i] += o.d_color[i];
      d_opacity[i] += o.d_opacity[i];
    }
  }
};

using GaussianSet = GaussianSetT<float>;

}  // namespace gsa
