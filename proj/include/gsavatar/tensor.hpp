#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsa {

// Dense row-major tensor. Training runs in float; gradient checks instantiate
// the same code paths in double.
template <typename Real>
struct TensorT {
  std::vector<int64_t> shape;
  std::vector<Real> data;
  bool requires_grad = false;

  TensorT() = default;
  explicit TensorT(std::vector<int64_t> s, Real fill = Real(0)) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(numel_of(shape)), fill);
  }

  static int64_t numel_of(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t d : s) {
      if (d < 0) throw std::invalid_argument("negative tensor dimension");
      n *= d;
    }
    return n;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  Real* ptr() { return data.data(); }
  const Real* ptr() const { return data.data(); }

  int64_t dim(size_t i) const { return shape.at(i); }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  void zero() { std::fill(data.begin(), data.end(), Real(0)); }

  bool all_finite() const {
    for (Real v : data) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  template <typename Other>
  TensorT<Other> cast() const {
    TensorT<Other> out;
    out.shape = shape;
    out.requires_grad = requires_grad;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<Other>(data[i]);
    return out;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }
};

using Tensor = TensorT<float>;

}  // namespace gsa
