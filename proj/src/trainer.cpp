#include "gsavatar/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "gsavatar/io.hpp"
#include "gsavatar/rasterizer.hpp"

namespace gsa {
namespace {

std::string format_metrics(const char* prefix, double psnr_v, double ssim_v, double l1_v) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s %.6f %.6f %.6f\n", prefix, psnr_v, ssim_v, l1_v);
  return buf;
}

}  // namespace

std::string EvalReport::to_text() const {
  std::string out;
  for (const auto& v : views) out += format_metrics(v.view_id.c_str(), v.psnr, v.ssim, v.l1);
  for (const auto& a : per_identity) {
    char id[64];
    std::snprintf(id, sizeof(id), "identity %lld", static_cast<long long>(a.identity));
    out += format_metrics(id, a.psnr, a.ssim, a.l1);
  }
  out += format_metrics("overall", overall.psnr, overall.ssim, overall.l1);
  return out;
}

Trainer::Trainer(const ModelConfig& mcfg, const TrainConfig& tcfg)
    : mcfg_(mcfg), tcfg_(tcfg), model_(mcfg, tcfg.seed), rng_(tcfg.seed ^ 0x7124AB5ULL) {}

StepReport Trainer::train_step(const SceneSample& sample) {
  const auto t0 = std::chrono::steady_clock::now();
  StepReport rep;
  rep.step = step_ + 1;

  const AssembleResultT<float>& fwd = model_.forward(sample.bundle, sample.target_expr);
  const GaussianSetT<float>& set = fwd.set;

  const int n_sup = static_cast<int>(sample.sup_cameras.size());
  if (n_sup == 0) throw std::invalid_argument("train_step: sample has no supervision views");
  GaussianGradientsT<float> dg(set.size());
  const Vec3f black{0, 0, 0};
  const float inv_views = 1.0f / float(n_sup);
  double loss = 0, l1_sum = 0, ssim_sum = 0;
  bool finite = true;

  for (int i = 0; i < n_sup && finite; ++i) {
    const RenderOutputT<float> out = rasterize(set, sample.sup_cameras[i], black);
    std::vector<float> d_render;
    float l1_term = 0, ssim_term = 0;
    const float view_loss =
        total_loss(out.image, sample.sup_images[i], sample.sup_width, sample.sup_height, 3,
                   tcfg_.weights, &d_render, &l1_term, &ssim_term);
    if (!std::isfinite(view_loss)) {
      finite = false;
      break;
    }
    loss += double(view_loss) * inv_views;
    l1_sum += double(l1_term) * inv_views;
    ssim_sum += double(1.0f - ssim_term) * inv_views;
    for (auto& v : d_render) v *= inv_views;
    dg.accumulate(rasterize_backward(set, sample.sup_cameras[i], black, d_render, out));
  }

  rep.loss = loss;
  rep.l1_term = l1_sum;
  rep.ssim_term = ssim_sum;

  if (!finite) {
    // Keep the state consistent: no gradient, no optimizer step.
    rep.skipped = true;
    ++skipped_;
    ++step_;
    rep.wallclock_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rep;
  }

  model_.params().zero_grads();
  model_.backward(dg);
  double gnorm = model_.params().grad_norm();
  if (!std::isfinite(gnorm)) {
    rep.skipped = true;
    ++skipped_;
    ++step_;
    model_.params().nonfinite_skips += 1;
    rep.wallclock_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rep;
  }
  if (tcfg_.grad_clip > 0 && gnorm > tcfg_.grad_clip)
    model_.params().scale_grads(tcfg_.grad_clip / gnorm);
  rep.grad_norm = gnorm;

  AdamConfig adam;
  adam.lr = tcfg_.lr;
  adam_step(model_.params(), adam);
  ++step_;

  if (loss_count_ == 0)
    loss_ema_ = loss;
  else
    loss_ema_ = 0.99 * loss_ema_ + 0.01 * loss;
  ++loss_count_;

  rep.wallclock_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

void metrics_for_sample(Reconstructor& model, const SceneSample& sample, EvalReport& report) {
  const AssembleResultT<float>& fwd = model.forward(sample.bundle, sample.target_expr);
  const Vec3f black{0, 0, 0};
  for (size_t i = 0; i < sample.sup_cameras.size(); ++i) {
    const RenderOutputT<float> out = rasterize(fwd.set, sample.sup_cameras[i], black);
    EvalViewEntry e;
    char id[96];
    std::snprintf(id, sizeof(id), "id%lld/s%lld/c%d", static_cast<long long>(sample.identity),
                  static_cast<long long>(sample.index),
                  i < sample.sup_camera_ids.size() ? sample.sup_camera_ids[i] : int(i));
    e.view_id = id;
    e.identity = sample.identity;
    e.psnr = psnr(out.image, sample.sup_images[i]);
    e.ssim = double(ssim(out.image, sample.sup_images[i], sample.sup_width, sample.sup_height, 3));
    e.l1 = double(l1_loss(out.image, sample.sup_images[i]));
    report.views.push_back(std::move(e));
  }
}

EvalReport Trainer::evaluate(const std::vector<SceneSample>& samples) {
  EvalReport report;
  for (const auto& s : samples) metrics_for_sample(model_, s, report);

  // Aggregates, grouped by identity in first-seen order.
  std::vector<int64_t> ids;
  for (const auto& v : report.views)
    if (std::find(ids.begin(), ids.end(), v.identity) == ids.end()) ids.push_back(v.identity);
  for (int64_t id : ids) {
    EvalReport::Aggregate a;
    a.identity = id;
    int64_t n = 0;
    for (const auto& v : report.views)
      if (v.identity == id) {
        a.psnr += v.psnr;
        a.ssim += v.ssim;
        a.l1 += v.l1;
        ++n;
      }
    a.psnr /= double(n);
    a.ssim /= double(n);
    a.l1 /= double(n);
    report.per_identity.push_back(a);
  }
  if (!report.views.empty()) {
    for (const auto& v : report.views) {
      report.overall.psnr += v.psnr;
      report.overall.ssim += v.ssim;
      report.overall.l1 += v.l1;
    }
    report.overall.psnr /= double(report.views.size());
    report.overall.ssim /= double(report.views.size());
    report.overall.l1 /= double(report.views.size());
  }
  return report;
}

void Trainer::save_checkpoint(const std::string& path) const {
  NamedTensors out;
  auto push_bits = [&out](const std::string& name, std::initializer_list<uint64_t> words) {
    Tensor t({int64_t(words.size()) * 2});
    int i = 0;
    for (uint64_t w : words) {
      bits_to_floats(w, t.ptr() + i * 2);
      ++i;
    }
    out.items.emplace_back(name, std::move(t));
  };
  push_bits("trainer/step", {uint64_t(step_)});
  push_bits("trainer/skipped", {uint64_t(skipped_)});
  push_bits("trainer/loss_count", {uint64_t(loss_count_)});
  const auto st = rng_.state();
  push_bits("trainer/rng", {st[0], st[1], st[2], st[3]});
  {
    Tensor t({1});
    // loss_ema kept at float precision in checkpoints
    t.data[0] = float(loss_ema_);
    out.items.emplace_back("trainer/loss_ema", std::move(t));
  }
  for (const auto& e : model_.params().entries) {
    out.items.emplace_back("param/" + e.name, e.value);
    out.items.emplace_back("adam.m/" + e.name, e.m);
    out.items.emplace_back("adam.v/" + e.name, e.v);
    push_bits("adam.t/" + e.name, {uint64_t(e.t)});
  }
  save_tensors(path, out);
}

void Trainer::load_checkpoint(const std::string& path) {
  const NamedTensors in = load_tensors(path);
  auto need = [&in, &path](const std::string& name) -> const Tensor& {
    const Tensor* t = in.find(name);
    if (!t) throw std::runtime_error("checkpoint missing tensor " + name + " in " + path);
    return *t;
  };
  auto read_bits = [&need](const std::string& name) {
    return floats_to_bits(need(name).ptr());
  };
  step_ = int64_t(read_bits("trainer/step"));
  skipped_ = int64_t(read_bits("trainer/skipped"));
  loss_count_ = int64_t(read_bits("trainer/loss_count"));
  {
    const Tensor& t = need("trainer/rng");
    if (t.numel() != 8) throw std::runtime_error("checkpoint rng state malformed");
    std::array<uint64_t, 4> st;
    for (int i = 0; i < 4; ++i) st[i] = floats_to_bits(t.ptr() + i * 2);
    rng_.set_state(st);
  }
  loss_ema_ = double(need("trainer/loss_ema").data[0]);
  for (auto& e : model_.params().entries) {
    auto check_assign = [&](const std::string& name, Tensor& dst) {
      const Tensor& src = need(name);
      if (src.shape != dst.shape)
        throw std::runtime_error("checkpoint shape mismatch for " + name);
      dst = src;
    };
    check_assign("param/" + e.name, e.value);
    check_assign("adam.m/" + e.name, e.m);
    check_assign("adam.v/" + e.name, e.v);
    e.t = int64_t(read_bits("adam.t/" + e.name));
  }
}

}  // namespace gsa
