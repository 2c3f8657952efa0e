#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gsavatar/gaussian_set.hpp"
#include "gsavatar/geometry.hpp"
#include "gsavatar/model.hpp"
#include "gsavatar/rasterizer.hpp"
#include "gsavatar/rng.hpp"

namespace gsa {

// Expression vector layout (kExprDim components in [-1, 1]):
//   0 jaw open, 1 eye blink, 2/3 left/right mouth corner raise, 4 brow raise,
//   5..7 reserved (no effect).
inline constexpr int kExprDim = 8;
inline constexpr int kActiveExprDims = 5;

// One rigged region of the head. The transform parameters are affine in the
// expression vector e: every Gaussian p in the part moves to
//   center + (1 + scale_coeff e) * (p - center) + trans_coeff e
// and its scale is multiplied componentwise by (1 + scale_coeff e).
struct RigPart {
  std::string name;
  Vec3f center;
  float trans_coeff[3][kExprDim] = {};
  float scale_coeff[3][kExprDim] = {};
  size_t first = 0, count = 0;  // range into the neutral Gaussian set
};

struct ProceduralHead {
  uint64_t identity_seed = 0;
  GaussianSet neutral;  // canonical pose, all inside the unit ball
  std::vector<RigPart> parts;
};

// Deterministic in identity_seed; distinct seeds vary part sizes and colors.
ProceduralHead make_head(uint64_t identity_seed);

// Applies the linear rig. Components outside [-1, 1] are clamped and counted
// in *clamp_warnings when provided.
GaussianSet pose_head(const ProceduralHead& head, const std::vector<float>& e,
                      int64_t* clamp_warnings = nullptr);

struct CameraRingSpec {
  int count = 40;       // split over the two latitude rings
  double radius = 2.5;  // scene units
  double lat_deg_low = -20.0, lat_deg_high = 20.0;
  double azimuth_deg = 110.0;       // rings span [-azimuth, +azimuth]
  double input_azimuth_deg = 90.0;  // beyond this: supervision-only (back-ish views)
  double fov_deg = 32.0;
  int width = 128, height = 128;
};

std::vector<Cameraf> build_camera_pool(const CameraRingSpec& spec);
// Pool indices whose azimuth qualifies them as input views.
std::vector<int> input_eligible_cameras(const CameraRingSpec& spec);

// k-farthest viewpoint sampling: start from a random eligible camera, grow a
// candidate set of size candidate_k by farthest-point sampling on angular
// distance (ties resolved toward the lower index), then pick v of the
// candidates uniformly. Returns pool indices.
std::vector<int> sample_viewpoints(const std::vector<Cameraf>& pool,
                                   const std::vector<int>& eligible, int v, int candidate_k,
                                   Rng& rng);

// Ground truth rendering shares the one rasterizer with training; background
// is black.
RenderOutputT<float> render_ground_truth(const ProceduralHead& head, const std::vector<float>& e,
                                         const Cameraf& camera);

// Back-projected alpha-weighted depth plus isotropic position noise; the
// confidence map is the accumulated alpha, zero on background.
void synth_position_map(const ProceduralHead& head, const std::vector<float>& e,
                        const Cameraf& camera, double sigma_pos, Rng& rng,
                        std::vector<float>& positions, std::vector<float>& confidence);

inline constexpr int kFeatChannels = 12;
inline constexpr int kFeatScale = 4;  // feature maps at quarter resolution

// Quarter-resolution geometric descriptors standing in for learned feature
// maps: normals(3), canonical position(3), centered depth(1), curvature
// proxy(1), foreground(1), reserved(3). Background pixels are all zero.
std::vector<float> synth_feature_map(const ProceduralHead& head, const std::vector<float>& e,
                                     const Cameraf& camera);

struct SceneSample {
  InputBundle bundle;
  std::vector<float> target_expr;  // e*, doubles as z_exp
  std::vector<std::vector<float>> input_exprs;
  int sup_width = 0, sup_height = 0;
  std::vector<Cameraf> sup_cameras;
  std::vector<std::vector<float>> sup_images;  // rendered at e*
  int64_t identity = 0;
  int64_t index = 0;
  int32_t target_expr_index = -1;
  std::vector<int32_t> input_camera_ids, sup_camera_ids;
};

// Everything needed to regenerate a dataset bit-identically.
struct GenConfig {
  uint64_t seed = 1;
  int identities = 1;
  int expressions = 8;          // expression pool size
  int heldout_expressions = 0;  // tail of the pool reserved for evaluation
  int views = 4;
  int input_size = 128;
  int sup_size = 160;
  int sup_views = 8;
  double p_inc = 0.0;      // probability an input view uses a non-target expression
  double sigma_pos = 0.01;  // position map noise, scene units
  int candidate_k = 10;
  CameraRingSpec ring;
  std::vector<int> heldout_cameras = {9, 30};  // never used by train samples
  std::string version = "1";
};

// Deterministic sample factory; the same (config, index) always produces the
// same bytes, so generation may be parallelized or re-run freely.
class DatasetGenerator {
 public:
  explicit DatasetGenerator(const GenConfig& cfg);

  const GenConfig& config() const { return cfg_; }
  const std::vector<std::vector<float>>& expression_pool() const { return expr_pool_; }
  const std::vector<Cameraf>& camera_pool() const { return pool_; }
  const ProceduralHead& head(int64_t identity) const { return heads_[static_cast<size_t>(identity)]; }
  int train_expression_count() const { return cfg_.expressions - cfg_.heldout_expressions; }

  SceneSample train_sample(int64_t index) const;
  // Evaluation samples render the held-out cameras; the target expression
  // comes from the held-out tail of the pool when one exists. When
  // inconsistent_inputs is set every input view is drawn at a random
  // non-target expression (the robustness protocol).
  SceneSample eval_sample(int64_t index, bool inconsistent_inputs = false) const;

  // Renders input maps for one view; exposed for the CLI and tests.
  void fill_view(const ProceduralHead& head, const std::vector<float>& e, int pool_camera,
                 Rng& rng, InputBundle& bundle, int slot) const;

 private:
  SceneSample make_sample(uint64_t stream_salt, int64_t index, bool eval, bool inconsistent) const;

  GenConfig cfg_;
  std::vector<ProceduralHead> heads_;
  std::vector<Cameraf> pool_;
  std::vector<int> input_eligible_;
  std::vector<int> sup_pool_;
  std::vector<std::vector<float>> expr_pool_;
};

}  // namespace gsa
