#include "gsavatar/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gsa {
namespace {

void write_exact(std::ostream& os, const void* data, size_t n) {
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!os) throw std::runtime_error("write failed");
}

void read_exact(std::istream& is, void* data, size_t n, const char* what) {
  is.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(is.gcount()) != n)
    throw std::runtime_error(std::string("corrupt or truncated file while reading ") + what);
}

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  write_exact(os, &v, sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T v;
  read_exact(is, &v, sizeof(T), what);
  return v;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return is;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void bits_to_floats(uint64_t bits, float out[2]) {
  std::memcpy(out, &bits, sizeof(uint64_t));
}

uint64_t floats_to_bits(const float in[2]) {
  uint64_t bits;
  std::memcpy(&bits, in, sizeof(uint64_t));
  return bits;
}

// ---------------------------------------------------------------------------

void save_splats(const std::string& path, const GaussianSet& set, bool with_tags) {
  set.validate();
  if (with_tags && set.source_views.size() != set.size())
    throw std::invalid_argument("save_splats: tags requested but not present");
  std::ofstream os = open_out(path);
  write_exact(os, "SPLATV01", 8);
  write_pod<uint64_t>(os, set.size());
  for (size_t i = 0; i < set.size(); ++i) {
    const float rec[14] = {set.positions[i].x, set.positions[i].y, set.positions[i].z,
                           set.scales[i].x,    set.scales[i].y,    set.scales[i].z,
                           set.rotations[i].w, set.rotations[i].x, set.rotations[i].y,
                           set.rotations[i].z, set.colors[i].x,    set.colors[i].y,
                           set.colors[i].z,    set.opacities[i]};
    write_exact(os, rec, sizeof(rec));
  }
  if (with_tags) {
    write_exact(os, "TAGS", 4);
    write_exact(os, set.source_views.data(), set.size() * sizeof(int32_t));
  }
}

GaussianSet load_splats(const std::string& path) {
  std::ifstream is = open_in(path);
  char magic[8];
  read_exact(is, magic, 8, "splat magic");
  if (std::memcmp(magic, "SPLATV01", 8) != 0)
    throw std::runtime_error("not a SPLATV01 file: " + path);
  const uint64_t count = read_pod<uint64_t>(is, "splat count");
  GaussianSet set;
  set.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    float rec[14];
    read_exact(is, rec, sizeof(rec), "splat record");
    Gaussian3DT<float> g;
    g.position = {rec[0], rec[1], rec[2]};
    g.scale = {rec[3], rec[4], rec[5]};
    g.rotation = {rec[6], rec[7], rec[8], rec[9]};
    g.color = {rec[10], rec[11], rec[12]};
    g.opacity = rec[13];
    set.push(g, -1);
  }
  set.source_views.clear();
  char tag[4];
  is.read(tag, 4);
  if (is.gcount() == 4) {
    if (std::memcmp(tag, "TAGS", 4) != 0) throw std::runtime_error("bad trailing block in " + path);
    set.source_views.resize(count);
    read_exact(is, set.source_views.data(), count * sizeof(int32_t), "splat tags");
  }
  return set;
}

// ---------------------------------------------------------------------------

void save_tensors(const std::string& path, const NamedTensors& tensors) {
  std::ofstream os = open_out(path);
  write_exact(os, "CKPTV01", 7);
  for (const auto& [name, t] : tensors.items) {
    write_pod<uint64_t>(os, name.size());
    write_exact(os, name.data(), name.size());
    write_pod<uint64_t>(os, t.shape.size());
    for (int64_t d : t.shape) write_pod<uint64_t>(os, static_cast<uint64_t>(d));
    write_exact(os, t.data.data(), t.data.size() * sizeof(float));
  }
}

NamedTensors load_tensors(const std::string& path) {
  std::ifstream is = open_in(path);
  char magic[7];
  read_exact(is, magic, 7, "checkpoint magic");
  if (std::memcmp(magic, "CKPTV01", 7) != 0)
    throw std::runtime_error("not a CKPTV01 file: " + path);
  NamedTensors out;
  for (;;) {
    uint64_t name_len;
    is.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    if (is.gcount() == 0) break;  // clean EOF
    if (is.gcount() != sizeof(name_len)) throw std::runtime_error("corrupt checkpoint: " + path);
    if (name_len > 4096) throw std::runtime_error("corrupt checkpoint (name length): " + path);
    std::string name(name_len, '\0');
    read_exact(is, name.data(), name_len, "tensor name");
    const uint64_t rank = read_pod<uint64_t>(is, "tensor rank");
    if (rank > 16) throw std::runtime_error("corrupt checkpoint (rank): " + path);
    std::vector<int64_t> shape(rank);
    for (auto& d : shape) d = static_cast<int64_t>(read_pod<uint64_t>(is, "tensor dim"));
    Tensor t(shape);
    read_exact(is, t.data.data(), t.data.size() * sizeof(float), "tensor payload");
    out.items.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------

KvFile KvFile::parse(const std::string& text) {
  KvFile kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("bad key=value line: " + line);
    kv.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return kv;
}

KvFile KvFile::parse_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

std::string KvFile::serialize() const {
  std::string out;
  for (const auto& [k, v] : entries) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

void KvFile::write_file(const std::string& path) const {
  std::ofstream os = open_out(path);
  const std::string s = serialize();
  write_exact(os, s.data(), s.size());
}

bool KvFile::has(const std::string& key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return true;
  return false;
}

const std::string& KvFile::get(const std::string& key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return v;
  throw std::runtime_error("missing key: " + key);
}

std::string KvFile::get_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? get(key) : fallback;
}

int64_t KvFile::get_int(const std::string& key) const {
  const std::string& s = get(key);
  size_t pos = 0;
  const int64_t v = std::stoll(s, &pos);
  if (pos != s.size()) throw std::runtime_error("bad integer for key " + key + ": " + s);
  return v;
}

double KvFile::get_double(const std::string& key) const {
  const std::string& s = get(key);
  size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::runtime_error("bad number for key " + key + ": " + s);
  return v;
}

void KvFile::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries)
    if (k == key) {
      v = value;
      return;
    }
  entries.emplace_back(key, value);
}

void KvFile::set_int(const std::string& key, int64_t value) { set(key, std::to_string(value)); }
void KvFile::set_double(const std::string& key, double value) { set(key, format_double(value)); }

// ---------------------------------------------------------------------------

namespace {
const char* const kModelKeys[] = {"views",      "height",     "width",        "patch_size",
                                  "dim",        "self_depth", "cross_depth",  "expr_tokens",
                                  "expr_dim",   "feat_dim",   "heads",        "conf_threshold",
                                  "scale_min",  "scale_max"};

void check_known_keys(const KvFile& kv, const char* const* keys, size_t n, const char* what) {
  for (const auto& [k, v] : kv.entries) {
    bool known = false;
    for (size_t i = 0; i < n; ++i)
      if (k == keys[i]) known = true;
    if (!known) throw std::runtime_error(std::string("unknown ") + what + " key: " + k);
  }
}
}  // namespace

KvFile model_config_to_kv(const ModelConfig& cfg) {
  KvFile kv;
  kv.set_int("views", cfg.views);
  kv.set_int("height", cfg.height);
  kv.set_int("width", cfg.width);
  kv.set_int("patch_size", cfg.patch_size);
  kv.set_int("dim", cfg.dim);
  kv.set_int("self_depth", cfg.self_depth);
  kv.set_int("cross_depth", cfg.cross_depth);
  kv.set_int("expr_tokens", cfg.expr_tokens);
  kv.set_int("expr_dim", cfg.expr_dim);
  kv.set_int("feat_dim", cfg.feat_dim);
  kv.set_int("heads", cfg.heads);
  kv.set_double("conf_threshold", cfg.conf_threshold);
  kv.set_double("scale_min", cfg.scale_min);
  kv.set_double("scale_max", cfg.scale_max);
  return kv;
}

ModelConfig model_config_from_kv(const KvFile& kv) {
  check_known_keys(kv, kModelKeys, sizeof(kModelKeys) / sizeof(*kModelKeys), "model config");
  ModelConfig cfg = ModelConfig::desk();
  if (kv.has("views")) cfg.views = int(kv.get_int("views"));
  if (kv.has("height")) cfg.height = int(kv.get_int("height"));
  if (kv.has("width")) cfg.width = int(kv.get_int("width"));
  if (kv.has("patch_size")) cfg.patch_size = int(kv.get_int("patch_size"));
  if (kv.has("dim")) cfg.dim = int(kv.get_int("dim"));
  if (kv.has("self_depth")) cfg.self_depth = int(kv.get_int("self_depth"));
  if (kv.has("cross_depth")) cfg.cross_depth = int(kv.get_int("cross_depth"));
  if (kv.has("expr_tokens")) cfg.expr_tokens = int(kv.get_int("expr_tokens"));
  if (kv.has("expr_dim")) cfg.expr_dim = int(kv.get_int("expr_dim"));
  if (kv.has("feat_dim")) cfg.feat_dim = int(kv.get_int("feat_dim"));
  if (kv.has("heads")) cfg.heads = int(kv.get_int("heads"));
  if (kv.has("conf_threshold")) cfg.conf_threshold = kv.get_double("conf_threshold");
  if (kv.has("scale_min")) cfg.scale_min = kv.get_double("scale_min");
  if (kv.has("scale_max")) cfg.scale_max = kv.get_double("scale_max");
  cfg.validate(/*strict=*/true);
  return cfg;
}

namespace {
const char* const kGenKeys[] = {
    "version",     "seed",        "identities",   "expressions", "heldout_expressions",
    "views",       "input_size",  "sup_size",     "sup_views",   "p_inc",
    "sigma_pos",   "candidate_k", "cam_count",    "cam_radius",  "cam_lat_low",
    "cam_lat_high", "cam_azimuth", "cam_input_azimuth", "cam_fov", "heldout_cameras"};
}

KvFile gen_config_to_kv(const GenConfig& cfg) {
  KvFile kv;
  kv.set("version", cfg.version);
  kv.set_int("seed", static_cast<int64_t>(cfg.seed));
  kv.set_int("identities", cfg.identities);
  kv.set_int("expressions", cfg.expressions);
  kv.set_int("heldout_expressions", cfg.heldout_expressions);
  kv.set_int("views", cfg.views);
  kv.set_int("input_size", cfg.input_size);
  kv.set_int("sup_size", cfg.sup_size);
  kv.set_int("sup_views", cfg.sup_views);
  kv.set_double("p_inc", cfg.p_inc);
  kv.set_double("sigma_pos", cfg.sigma_pos);
  kv.set_int("candidate_k", cfg.candidate_k);
  kv.set_int("cam_count", cfg.ring.count);
  kv.set_double("cam_radius", cfg.ring.radius);
  kv.set_double("cam_lat_low", cfg.ring.lat_deg_low);
  kv.set_double("cam_lat_high", cfg.ring.lat_deg_high);
  kv.set_double("cam_azimuth", cfg.ring.azimuth_deg);
  kv.set_double("cam_input_azimuth", cfg.ring.input_azimuth_deg);
  kv.set_double("cam_fov", cfg.ring.fov_deg);
  std::string held;
  for (size_t i = 0; i < cfg.heldout_cameras.size(); ++i) {
    if (i) held += ',';
    held += std::to_string(cfg.heldout_cameras[i]);
  }
  kv.set("heldout_cameras", held);
  return kv;
}

GenConfig gen_config_from_kv(const KvFile& kv) {
  check_known_keys(kv, kGenKeys, sizeof(kGenKeys) / sizeof(*kGenKeys), "manifest");
  GenConfig cfg;
  if (kv.has("version")) cfg.version = kv.get("version");
  if (kv.has("seed")) cfg.seed = static_cast<uint64_t>(kv.get_int("seed"));
  if (kv.has("identities")) cfg.identities = int(kv.get_int("identities"));
  if (kv.has("expressions")) cfg.expressions = int(kv.get_int("expressions"));
  if (kv.has("heldout_expressions")) cfg.heldout_expressions = int(kv.get_int("heldout_expressions"));
  if (kv.has("views")) cfg.views = int(kv.get_int("views"));
  if (kv.has("input_size")) cfg.input_size = int(kv.get_int("input_size"));
  if (kv.has("sup_size")) cfg.sup_size = int(kv.get_int("sup_size"));
  if (kv.has("sup_views")) cfg.sup_views = int(kv.get_int("sup_views"));
  if (kv.has("p_inc")) cfg.p_inc = kv.get_double("p_inc");
  if (kv.has("sigma_pos")) cfg.sigma_pos = kv.get_double("sigma_pos");
  if (kv.has("candidate_k")) cfg.candidate_k = int(kv.get_int("candidate_k"));
  if (kv.has("cam_count")) cfg.ring.count = int(kv.get_int("cam_count"));
  if (kv.has("cam_radius")) cfg.ring.radius = kv.get_double("cam_radius");
  if (kv.has("cam_lat_low")) cfg.ring.lat_deg_low = kv.get_double("cam_lat_low");
  if (kv.has("cam_lat_high")) cfg.ring.lat_deg_high = kv.get_double("cam_lat_high");
  if (kv.has("cam_azimuth")) cfg.ring.azimuth_deg = kv.get_double("cam_azimuth");
  if (kv.has("cam_input_azimuth")) cfg.ring.input_azimuth_deg = kv.get_double("cam_input_azimuth");
  if (kv.has("cam_fov")) cfg.ring.fov_deg = kv.get_double("cam_fov");
  if (kv.has("heldout_cameras")) {
    cfg.heldout_cameras.clear();
    const std::string& s = kv.get("heldout_cameras");
    size_t pos = 0;
    while (pos < s.size()) {
      size_t comma = s.find(',', pos);
      if (comma == std::string::npos) comma = s.size();
      if (comma > pos) cfg.heldout_cameras.push_back(std::stoi(s.substr(pos, comma - pos)));
      pos = comma + 1;
    }
  }
  cfg.ring.width = cfg.ring.height = cfg.input_size;
  return cfg;
}

// ---------------------------------------------------------------------------

namespace {

constexpr uint32_t fourcc(const char s[5]) {
  return uint32_t(s[0]) | uint32_t(s[1]) << 8 | uint32_t(s[2]) << 16 | uint32_t(s[3]) << 24;
}

void write_section(std::ostream& os, const char tag[5], const void* data, size_t bytes) {
  write_pod<uint32_t>(os, fourcc(tag));
  write_pod<uint64_t>(os, bytes);
  if (bytes) write_exact(os, data, bytes);
}

void write_camera(std::vector<float>& out, const Cameraf& c) {
  const float rec[11] = {c.fx,          c.fy,          c.cx,          c.cy,
                         c.rotation.w,  c.rotation.x,  c.rotation.y,  c.rotation.z,
                         c.translation.x, c.translation.y, c.translation.z};
  out.insert(out.end(), rec, rec + 11);
  float wh[2];
  const uint32_t w = uint32_t(c.width), h = uint32_t(c.height);
  std::memcpy(&wh[0], &w, 4);
  std::memcpy(&wh[1], &h, 4);
  out.insert(out.end(), wh, wh + 2);
}

Cameraf read_camera(const float* rec) {
  Cameraf c;
  c.fx = rec[0];
  c.fy = rec[1];
  c.cx = rec[2];
  c.cy = rec[3];
  c.rotation = {rec[4], rec[5], rec[6], rec[7]};
  c.translation = {rec[8], rec[9], rec[10]};
  uint32_t w, h;
  std::memcpy(&w, &rec[11], 4);
  std::memcpy(&h, &rec[12], 4);
  c.width = int(w);
  c.height = int(h);
  return c;
}

constexpr int kCameraFloats = 13;

}  // namespace

void save_sample(const std::string& path, const SceneSample& s) {
  std::ofstream os = open_out(path);
  write_exact(os, "SAMPV01", 7);

  const int n_sup = int(s.sup_cameras.size());
  const int expr_dim = int(s.target_expr.size());
  {
    uint32_t meta[10] = {uint32_t(s.bundle.views),  uint32_t(s.bundle.height),
                         uint32_t(s.sup_width),     uint32_t(s.sup_height),
                         uint32_t(s.bundle.feat_h), uint32_t(s.bundle.feat_w),
                         uint32_t(s.bundle.feat_dim), uint32_t(n_sup),
                         uint32_t(expr_dim),        uint32_t(int32_t(s.target_expr_index))};
    std::vector<uint8_t> buf(sizeof(meta) + 16);
    std::memcpy(buf.data(), meta, sizeof(meta));
    std::memcpy(buf.data() + sizeof(meta), &s.identity, 8);
    std::memcpy(buf.data() + sizeof(meta) + 8, &s.index, 8);
    write_section(os, "META", buf.data(), buf.size());
  }
  {
    std::vector<float> cams;
    for (const auto& c : s.bundle.cameras) write_camera(cams, c);
    write_section(os, "CAMI", cams.data(), cams.size() * 4);
  }
  {
    std::vector<float> cams;
    for (const auto& c : s.sup_cameras) write_camera(cams, c);
    write_section(os, "CAMS", cams.data(), cams.size() * 4);
  }
  write_section(os, "IMGS", s.bundle.images.data(), s.bundle.images.size() * 4);
  write_section(os, "POSM", s.bundle.positions.data(), s.bundle.positions.size() * 4);
  write_section(os, "CONF", s.bundle.confidence.data(), s.bundle.confidence.size() * 4);
  write_section(os, "FEAT", s.bundle.features.data(), s.bundle.features.size() * 4);
  {
    std::vector<float> expr(s.target_expr);
    for (const auto& e : s.input_exprs) expr.insert(expr.end(), e.begin(), e.end());
    write_section(os, "EXPR", expr.data(), expr.size() * 4);
  }
  {
    std::vector<float> flat;
    for (const auto& img : s.sup_images) flat.insert(flat.end(), img.begin(), img.end());
    write_section(os, "SUPI", flat.data(), flat.size() * 4);
  }
  {
    std::vector<int32_t> ids(s.input_camera_ids);
    ids.insert(ids.end(), s.sup_camera_ids.begin(), s.sup_camera_ids.end());
    write_section(os, "CIDS", ids.data(), ids.size() * 4);
  }
}

SceneSample load_sample(const std::string& path) {
  std::ifstream is = open_in(path);
  char magic[7];
  read_exact(is, magic, 7, "sample magic");
  if (std::memcmp(magic, "SAMPV01", 7) != 0)
    throw std::runtime_error("not a SAMPV01 file: " + path);

  SceneSample s;
  int n_sup = 0, expr_dim = 0;
  bool have_meta = false;
  for (;;) {
    uint32_t tag;
    is.read(reinterpret_cast<char*>(&tag), sizeof(tag));
    if (is.gcount() == 0) break;
    if (is.gcount() != sizeof(tag)) throw std::runtime_error("corrupt sample: " + path);
    const uint64_t len = read_pod<uint64_t>(is, "section length");
    std::vector<uint8_t> buf(len);
    read_exact(is, buf.data(), len, "section payload");
    const float* f = reinterpret_cast<const float*>(buf.data());

    if (tag == fourcc("META")) {
      uint32_t meta[10];
      std::memcpy(meta, buf.data(), sizeof(meta));
      s.bundle.views = int(meta[0]);
      s.bundle.height = s.bundle.width = int(meta[1]);
      s.sup_width = int(meta[2]);
      s.sup_height = int(meta[3]);
      s.bundle.feat_h = int(meta[4]);
      s.bundle.feat_w = int(meta[5]);
      s.bundle.feat_dim = int(meta[6]);
      n_sup = int(meta[7]);
      expr_dim = int(meta[8]);
      s.target_expr_index = int32_t(meta[9]);
      std::memcpy(&s.identity, buf.data() + sizeof(meta), 8);
      std::memcpy(&s.index, buf.data() + sizeof(meta) + 8, 8);
      have_meta = true;
    } else if (tag == fourcc("CAMI")) {
      for (size_t off = 0; off + kCameraFloats <= len / 4; off += kCameraFloats)
        s.bundle.cameras.push_back(read_camera(f + off));
    } else if (tag == fourcc("CAMS")) {
      for (size_t off = 0; off + kCameraFloats <= len / 4; off += kCameraFloats)
        s.sup_cameras.push_back(read_camera(f + off));
    } else if (tag == fourcc("IMGS")) {
      s.bundle.images.assign(f, f + len / 4);
    } else if (tag == fourcc("POSM")) {
      s.bundle.positions.assign(f, f + len / 4);
    } else if (tag == fourcc("CONF")) {
      s.bundle.confidence.assign(f, f + len / 4);
    } else if (tag == fourcc("FEAT")) {
      s.bundle.features.assign(f, f + len / 4);
    } else if (tag == fourcc("EXPR")) {
      if (!have_meta) throw std::runtime_error("sample EXPR before META: " + path);
      s.target_expr.assign(f, f + expr_dim);
      const size_t per = size_t(expr_dim);
      for (size_t off = per; off + per <= len / 4; off += per)
        s.input_exprs.emplace_back(f + off, f + off + per);
    } else if (tag == fourcc("SUPI")) {
      if (!have_meta) throw std::runtime_error("sample SUPI before META: " + path);
      const size_t per = size_t(s.sup_width) * s.sup_height * 3;
      for (int i = 0; i < n_sup; ++i)
        s.sup_images.emplace_back(f + i * per, f + (i + 1) * per);
    } else if (tag == fourcc("CIDS")) {
      if (!have_meta) throw std::runtime_error("sample CIDS before META: " + path);
      const int32_t* ids = reinterpret_cast<const int32_t*>(buf.data());
      s.input_camera_ids.assign(ids, ids + s.bundle.views);
      s.sup_camera_ids.assign(ids + s.bundle.views, ids + s.bundle.views + n_sup);
    } else {
      throw std::runtime_error("unknown section in sample file: " + path);
    }
  }
  if (!have_meta) throw std::runtime_error("sample missing META: " + path);
  s.bundle.compute_plucker();
  s.bundle.validate();
  return s;
}

// ---------------------------------------------------------------------------

void save_ppm(const std::string& path, const std::vector<float>& rgb, int width, int height) {
  if (rgb.size() != static_cast<size_t>(width) * height * 3)
    throw std::invalid_argument("save_ppm: size mismatch");
  std::ofstream os = open_out(path);
  char header[64];
  const int n = std::snprintf(header, sizeof(header), "P6\n%d %d\n255\n", width, height);
  write_exact(os, header, size_t(n));
  std::vector<uint8_t> bytes(rgb.size());
  for (size_t i = 0; i < rgb.size(); ++i) {
    const double v = std::min(1.0, std::max(0.0, double(rgb[i])));
    bytes[i] = static_cast<uint8_t>(std::lround(v * 255.0));
  }
  write_exact(os, bytes.data(), bytes.size());
}

std::vector<float> load_ppm(const std::string& path, int& width, int& height) {
  std::ifstream is = open_in(path);
  std::string magic;
  int maxval = 0;
  is >> magic >> width >> height >> maxval;
  if (magic != "P6" || maxval != 255 || width <= 0 || height <= 0)
    throw std::runtime_error("unsupported PPM: " + path);
  is.get();  // single whitespace after maxval
  std::vector<uint8_t> bytes(static_cast<size_t>(width) * height * 3);
  read_exact(is, bytes.data(), bytes.size(), "ppm payload");
  std::vector<float> rgb(bytes.size());
  for (size_t i = 0; i < bytes.size(); ++i) rgb[i] = float(bytes[i]) / 255.0f;
  return rgb;
}

}  // namespace gsa
