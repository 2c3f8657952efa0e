#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gsavatar/gaussian_set.hpp"
#include "gsavatar/model.hpp"
#include "gsavatar/synthdata.hpp"
#include "gsavatar/tensor.hpp"

// Byte-level layouts of every container written by this project are
// documented in docs/FORMATS.md. All integers and floats are little-endian.

namespace gsa {

// SPLATV01 point-cloud export: 8-byte magic "SPLATV01", uint64 count, then
// per Gaussian 14 float32: position(3), scale(3), rotation quaternion
// (w,x,y,z), color(3), opacity. With tags, a trailing "TAGS" block carries
// one int32 source-view tag per Gaussian.
void save_splats(const std::string& path, const GaussianSet& set, bool with_tags);
GaussianSet load_splats(const std::string& path);

// CKPTV01 named-tensor container: 7-byte magic, then per tensor
// uint64 name length, name bytes, uint64 rank, uint64 dims, float32 payload.
struct NamedTensors {
  std::vector<std::pair<std::string, Tensor>> items;

  const Tensor* find(const std::string& name) const {
    for (const auto& [n, t] : items)
      if (n == name) return &t;
    return nullptr;
  }
};
void save_tensors(const std::string& path, const NamedTensors& tensors);
NamedTensors load_tensors(const std::string& path);  // throws on corruption

// Flat key=value text files (configs, manifests). '#' starts a comment line.
struct KvFile {
  std::vector<std::pair<std::string, std::string>> entries;

  static KvFile parse(const std::string& text);
  static KvFile parse_file(const std::string& path);
  std::string serialize() const;
  void write_file(const std::string& path) const;

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  void set(const std::string& key, const std::string& value);
  void set_int(const std::string& key, int64_t value);
  void set_double(const std::string& key, double value);
};

// Model configuration <-> key=value. Unknown keys are errors.
KvFile model_config_to_kv(const ModelConfig& cfg);
ModelConfig model_config_from_kv(const KvFile& kv);

// Dataset manifest <-> key=value. Unknown keys are errors; regenerating from
// the manifest reproduces a dataset byte for byte.
KvFile gen_config_to_kv(const GenConfig& cfg);
GenConfig gen_config_from_kv(const KvFile& kv);

// SAMPV01 scene-sample container: 7-byte magic, then tagged sections
// (uint32 fourcc, uint64 byte length, payload). Plucker maps are derived
// from the stored cameras on load rather than stored.
void save_sample(const std::string& path, const SceneSample& sample);
SceneSample load_sample(const std::string& path);

// Binary PPM (P6, maxval 255), RGB interleaved, rows top to bottom. Values
// are clamped to [0,1] and rounded to 8 bits.
void save_ppm(const std::string& path, const std::vector<float>& rgb, int width, int height);
std::vector<float> load_ppm(const std::string& path, int& width, int& height);

// int64/uint64 <-> float32-pair bitcast used to round-trip exact integer and
// RNG state through the float32-only checkpoint container.
void bits_to_floats(uint64_t bits, float out[2]);
uint64_t floats_to_bits(const float in[2]);

}  // namespace gsa
