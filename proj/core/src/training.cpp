#include <cmath>
#include <cstdio>
#include <numeric>

#include "gav/binio.hpp"
#include "gav/ops.hpp"
#include "gav/rng.hpp"
#include "gav/skinning.hpp"
#include "gav/training.hpp"

namespace gav {
namespace train {

namespace {

constexpr uint64_t kStepMix = 0x9E3779B97F4A7C15ULL;

void write_tensor_map(BinWriter& w, const std::map<std::string, Tensor>& m) {
  w.u32(static_cast<uint32_t>(m.size()));
  for (const auto& [key, t] : m) {
    w.str(key);
    w.u32(static_cast<uint32_t>(t.rank()));
    for (int64_t a = 0; a < t.rank(); ++a) w.u64(static_cast<uint64_t>(t.extent(a)));
    w.f64_array(t);
  }
}

std::map<std::string, Tensor> read_tensor_map(BinReader& r) {
  std::map<std::string, Tensor> m;
  uint32_t n = r.u32();
  for (uint32_t i = 0; i < n; ++i) {
    std::string key = r.str();
    uint32_t rank = r.u32();
    Shape s;
    for (uint32_t a = 0; a < rank; ++a) s.push_back(static_cast<int64_t>(r.u64()));
    m.emplace(std::move(key), r.f64_tensor(std::move(s)));
  }
  return m;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0)) throw Error("train config: lr must be positive");
  if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1))
    throw Error("train config: betas must lie in (0,1)");
  if (!(eps > 0)) throw Error("train config: eps must be positive");
  if (weight_decay < 0) throw Error("train config: negative weight decay");
  if (!(clip > 0)) throw Error("train config: clip threshold must be positive");
  if (iterations < 0) throw Error("train config: negative iteration count");
  if (targets_per_step < 1) throw Error("train config: need at least one target view");
  net.validate();
}

double clip_gradients(GradMap& grads, double threshold) {
  double sq = 0;
  for (const auto& [key, g] : grads)
    for (int64_t i = 0; i < g.size(); ++i) sq += g[i] * g[i];
  double norm = std::sqrt(sq);
  if (norm > threshold) {
    double s = threshold / norm;
    for (auto& [key, g] : grads)
      for (int64_t i = 0; i < g.size(); ++i) g[i] *= s;
  }
  return norm;
}

void adamw_step(net::NetworkWeights& params, const GradMap& grads,
                AdamState& state, const TrainConfig& cfg) {
  state.step += 1;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (auto& [key, p] : params.params) {
    auto git = grads.find(key);
    if (git == grads.end())
      throw Error("adamw_step: missing gradient for " + key);
    const Tensor& g = git->second;
    if (!g.same_shape(p)) throw Error("adamw_step: gradient shape mismatch for " + key);
    Tensor& m = state.m.try_emplace(key, Tensor(p.shape())).first->second;
    Tensor& v = state.v.try_emplace(key, Tensor(p.shape())).first->second;
    for (int64_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      p[i] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) +
                        cfg.weight_decay * p[i]);
    }
  }
}

Trainer::Trainer(TrainConfig cfg, SyntheticScene scene)
    : cfg_(std::move(cfg)),
      scene_(std::move(scene)),
      percep_(loss::FeaturePyramid::make(cfg_.percep_seed)) {
  cfg_.validate();
  if (scene_.views.empty()) throw Error("trainer: scene has no views");
  const Tensor& img0 = scene_.views[0].rgb;
  if (img0.extent(0) != cfg_.net.body_res || img0.extent(1) != cfg_.net.body_res)
    throw Error("trainer: scene image resolution does not match the network body resolution");
  if (static_cast<int64_t>(scene_.train_views().size()) < cfg_.targets_per_step)
    throw Error("trainer: fewer training views than targets per step");
  if (scene_.skin_weights.extent(0) != scene_.points.count())
    throw Error("trainer: skin weight rows do not match anchor count");
  cfg_.weights.scale_target = scene_.anchor_spacing;
  weights_ = net::NetworkWeights::init(cfg_.net, cfg_.init_seed);
  for (const SceneView& v : scene_.views)
    head_crops_.push_back(crop_resize(v.rgb, v.head_rect, cfg_.net.head_res));
}

loss::LossReport Trainer::train_step() {
  Rng srng(cfg_.step_seed ^ (kStepMix * static_cast<uint64_t>(state_.step + 1)));
  std::vector<int64_t> tv = scene_.train_views();
  int64_t src = tv[srng.uniform_int(tv.size())];
  // Target views: sampled without replacement among themselves.
  std::vector<int64_t> pool = tv;
  std::vector<int64_t> targets;
  for (int64_t k = 0; k < cfg_.targets_per_step; ++k) {
    size_t j = k + srng.uniform_int(pool.size() - k);
    std::swap(pool[k], pool[j]);
    targets.push_back(pool[k]);
  }
  double mask_ratio = srng.uniform() * cfg_.net.max_mask_ratio;
  uint64_t mask_seed = srng.next_u64();

  Tape tape;
  net::VarMap vm = net::as_leaves(tape, weights_);
  Var body_img = constant(scene_.views[src].rgb);
  Var crop = constant(head_crops_[src]);
  net::RawVars raw =
      net::predict_gaussians(body_img, crop, scene_.points, cfg_.net, vm,
                             net::ForwardMode::training(mask_ratio, mask_seed));
  splat::GaussianVars g =
      splat::activate_raw(raw.offset_raw, raw.rotation_raw, raw.scale_raw,
                          raw.opacity_raw, raw.sh_raw, scene_.points.positions,
                          cfg_.activation);
  Var offsets = ops::sub(g.positions, constant(scene_.points.positions));

  Var color_acc, mask_acc, percep_acc;
  for (int64_t k = 0; k < cfg_.targets_per_step; ++k) {
    const SceneView& view = scene_.views[targets[k]];
    std::vector<Mat4> transforms = body::forward_kinematics(scene_.body, view.pose);
    skin::PosedVars posed = skin::pose_gaussians(
        g.positions, g.rotations, scene_.skin_weights, transforms);
    raster::RenderVars rv =
        raster::render(posed.positions, posed.rotations, g.scales, g.opacities,
                       g.sh_coeffs, view.camera, {0, 0, 0});
    Var c = loss::color_loss(rv.rgb, constant(view.rgb));
    Var m = loss::mask_loss(rv.alpha, constant(view.alpha));
    Var p = loss::perceptual_loss(rv.rgb, constant(view.rgb), percep_);
    color_acc = k == 0 ? c : ops::add(color_acc, c);
    mask_acc = k == 0 ? m : ops::add(mask_acc, m);
    percep_acc = k == 0 ? p : ops::add(percep_acc, p);
  }
  double inv_k = 1.0 / static_cast<double>(cfg_.targets_per_step);
  loss::LossVars lv;
  lv.color = ops::mul(color_acc, inv_k);
  lv.mask = ops::mul(mask_acc, inv_k);
  lv.perceptual = ops::mul(percep_acc, inv_k);
  lv.isotropy = loss::isotropy_loss(g.scales, cfg_.weights.scale_target);
  lv.offset = loss::offset_loss(offsets, cfg_.weights.offset_limit);
  lv.total = loss::assemble_total(lv.color, lv.mask, lv.perceptual, lv.isotropy,
                                  lv.offset, cfg_.weights);
  lv.total.value().check_finite("training loss");

  tape.backward(lv.total);
  GradMap grads;
  for (const auto& [key, t] : weights_.params) grads[key] = tape.grad(vm.at(key));
  clip_gradients(grads, cfg_.clip);
  adamw_step(weights_, grads, state_, cfg_);
  return loss::report_of(lv, cfg_.weights);
}

splat::GaussianSet Trainer::predict_canonical() const {
  int64_t src = scene_.source_view;
  splat::RawGaussianParams raw = net::predict_gaussians_value(
      scene_.views[src].rgb, head_crops_[src], scene_.points, cfg_.net, weights_);
  return splat::activate_raw(raw, scene_.points.positions, cfg_.activation);
}

void write_checkpoint(const Checkpoint& c, const std::string& path) {
  BinWriter w;
  w.tag("LHK1");
  w.u32(1);
  w.u64(static_cast<uint64_t>(c.step));
  w.u64(c.init_seed);
  w.u64(c.step_seed);
  w.u64(c.percep_seed);
  write_tensor_map(w, c.weights.params);
  write_tensor_map(w, c.state.m);
  write_tensor_map(w, c.state.v);
  w.save(path);
}

Checkpoint read_checkpoint(const std::string& path) {
  BinReader r = BinReader::from_file(path);
  r.set_context("checkpoint header");
  if (r.tag() != "LHK1") throw Error(path + ": bad magic, not a checkpoint");
  uint32_t ver = r.u32();
  if (ver != 1) throw Error(path + ": unsupported version " + std::to_string(ver));
  Checkpoint c;
  c.step = static_cast<int64_t>(r.u64());
  c.init_seed = r.u64();
  c.step_seed = r.u64();
  c.percep_seed = r.u64();
  r.set_context("checkpoint weights");
  c.weights.params = read_tensor_map(r);
  r.set_context("checkpoint optimizer moments");
  c.state.m = read_tensor_map(r);
  c.state.v = read_tensor_map(r);
  c.state.step = c.step;
  if (!r.eof()) throw Error(path + ": trailing bytes after checkpoint payload");
  return c;
}

void Trainer::save_checkpoint(const std::string& path) const {
  Checkpoint c;
  c.step = state_.step;
  c.init_seed = cfg_.init_seed;
  c.step_seed = cfg_.step_seed;
  c.percep_seed = cfg_.percep_seed;
  c.weights = weights_;
  c.state = state_;
  write_checkpoint(c, path);
}

void Trainer::load_checkpoint(const std::string& path) {
  Checkpoint c = read_checkpoint(path);
  for (const auto& [key, t] : weights_.params) {
    auto it = c.weights.params.find(key);
    if (it == c.weights.params.end())
      throw Error(path + ": checkpoint is missing " + key);
    if (!it->second.same_shape(t))
      throw Error(path + ": shape mismatch for " + key +
                  " (checkpoint was written for a different architecture)");
  }
  if (c.weights.params.size() != weights_.params.size())
    throw Error(path + ": checkpoint has extra parameter entries");

  cfg_.init_seed = c.init_seed;
  cfg_.step_seed = c.step_seed;
  if (c.percep_seed != cfg_.percep_seed) {
    cfg_.percep_seed = c.percep_seed;
    percep_ = loss::FeaturePyramid::make(c.percep_seed);
  }
  weights_ = std::move(c.weights);
  state_ = std::move(c.state);
}

std::string EvalReport::to_text() const {
  std::string out;
  char line[128];
  for (const EvalRow& r : rows) {
    std::snprintf(line, sizeof(line), "view %03lld psnr %.6f ssim %.6f\n",
                  static_cast<long long>(r.view), r.psnr, r.ssim);
    out += line;
  }
  std::snprintf(line, sizeof(line), "mean psnr %.6f ssim %.6f\n", mean_psnr,
                mean_ssim);
  out += line;
  return out;
}

EvalReport evaluate(const splat::GaussianSet& canonical,
                    const SyntheticScene& scene,
                    const std::vector<int64_t>& view_indices) {
  if (view_indices.empty()) throw Error("evaluate: no views given");
  EvalReport rep;
  for (int64_t idx : view_indices) {
    if (idx < 0 || idx >= static_cast<int64_t>(scene.views.size()))
      throw Error("evaluate: view index out of range");
    const SceneView& view = scene.views[idx];
    std::vector<Mat4> transforms = body::forward_kinematics(scene.body, view.pose);
    splat::GaussianSet posed =
        skin::pose_gaussians(canonical, scene.skin_weights, transforms);
    raster::RenderResult rr = raster::render(posed, view.camera, {0, 0, 0});
    EvalRow row;
    row.view = idx;
    row.psnr = loss::psnr(rr.rgb, view.rgb);
    row.ssim = loss::ssim(rr.rgb, view.rgb);
    rep.mean_psnr += row.psnr;
    rep.mean_ssim += row.ssim;
    rep.rows.push_back(row);
  }
  rep.mean_psnr /= static_cast<double>(rep.rows.size());
  rep.mean_ssim /= static_cast<double>(rep.rows.size());
  return rep;
}

}  // namespace train
}  // namespace gav
