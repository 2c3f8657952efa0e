#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gsavatar/losses.hpp"
#include "gsavatar/model.hpp"
#include "gsavatar/rng.hpp"
#include "gsavatar/synthdata.hpp"

namespace gsa {

struct TrainConfig {
  double lr = 5e-5;
  int64_t steps = 1000;
  int sup_views = 8;    // supervision renders per sample
  int input_views = 4;  // V
  double p_inc = 0.0;
  uint64_t seed = 1;
  int64_t ckpt_every = 1000;
  int64_t eval_every = 0;  // 0 disables periodic eval
  LossWeights weights;
  // The perceptual term stays at weight zero in this artifact; the schedule
  // key documents when a full-scale run would enable it.
  int64_t lpips_start_step = 3000000;
  double grad_clip = 1.0;
};

struct StepReport {
  int64_t step = 0;
  double loss = 0, l1_term = 0, ssim_term = 0, grad_norm = 0, wallclock_ms = 0;
  bool skipped = false;  // non-finite loss, parameters untouched
};

struct EvalViewEntry {
  std::string view_id;
  int64_t identity = 0;
  double psnr = 0, ssim = 0, l1 = 0;
};

struct EvalReport {
  std::vector<EvalViewEntry> views;
  struct Aggregate {
    int64_t identity = -1;  // -1 = overall
    double psnr = 0, ssim = 0, l1 = 0;
  };
  std::vector<Aggregate> per_identity;
  Aggregate overall;

  // One "view_id psnr ssim l1" line per view, then per-identity and overall
  // aggregate lines ("identity <id> ..." / "overall ...").
  std::string to_text() const;
};

// Owns the model and optimizer state; one trainer instance per run. The
// training trajectory is a pure function of (model config, train config,
// dataset); wallclock_ms in step reports is measurement, not state.
class Trainer {
 public:
  Trainer(const ModelConfig& mcfg, const TrainConfig& tcfg);

  StepReport train_step(const SceneSample& sample);

  // Renders every supervision view of every sample; does not touch trainable
  // state (scratch activation caches aside).
  EvalReport evaluate(const std::vector<SceneSample>& samples);

  // Bit-exact round trip including Adam moments, RNG state, and counters.
  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

  Reconstructor& model() { return model_; }
  const TrainConfig& config() const { return tcfg_; }
  int64_t step() const { return step_; }
  int64_t skipped_steps() const { return skipped_; }
  double loss_ema() const { return loss_ema_; }
  Rng& rng() { return rng_; }

 private:
  ModelConfig mcfg_;
  TrainConfig tcfg_;
  Reconstructor model_;
  Rng rng_;
  int64_t step_ = 0;
  int64_t skipped_ = 0;
  double loss_ema_ = 0;
  int64_t loss_count_ = 0;
};

// Renders `set` from every supervision camera of `sample` and reports
// metrics; shared by Trainer::evaluate and the CLI eval path.
void metrics_for_sample(Reconstructor& model, const SceneSample& sample, EvalReport& report);

}  // namespace gsa
