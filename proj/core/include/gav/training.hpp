#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gav/body_model.hpp"
#include "gav/gaussians.hpp"
#include "gav/losses.hpp"
#include "gav/network.hpp"
#include "gav/renderer.hpp"
#include "gav/tensor.hpp"

namespace gav {
namespace train {

struct TrainConfig {
  double lr = 4e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double weight_decay = 5e-4;
  double clip = 0.1;  // global L2 gradient threshold
  int64_t iterations = 2000;
  int64_t targets_per_step = 4;
  uint64_t init_seed = 3;     // network weights
  uint64_t step_seed = 2;     // per-step view/mask sampling
  uint64_t percep_seed = 1234;  // perceptual feature pyramid
  net::NetworkConfig net;
  loss::LossWeights weights;  // scale_target is taken from the scene
  splat::ActivationConfig activation;

  void validate() const;
};

/// One rendered view of the ground-truth avatar.
struct SceneView {
  raster::Camera camera;
  body::Pose pose;
  Tensor rgb;    // H x W x 3
  Tensor alpha;  // H x W x 1
  double head_rect[4] = {0, 0, 0, 0};  // x0, y0, x1, y1 pixels
};

/// Self-rendered synthetic training scene: the optimum is exactly
/// representable, so sharp photometric thresholds are meaningful.
struct SyntheticScene {
  body::BodyTemplate body;
  body::SampledPoints points;  // canonical anchors
  splat::GaussianSet gt;       // ground-truth canonical Gaussians
  Tensor skin_weights;         // N x J, queried once at the anchors
  double anchor_spacing = 0;   // mean nearest-neighbor distance
  std::vector<SceneView> views;
  std::vector<int64_t> holdout;  // view indices excluded from training
  int64_t source_view = 0;
  uint64_t seed = 0;

  std::vector<int64_t> train_views() const;
};

struct SceneParams {
  int64_t n_gaussians = 500;
  int64_t n_train_views = 8;
  int64_t n_holdout_views = 4;
  int64_t image_res = 128;
  int64_t skin_resolution = 32;
  double camera_distance = 2.3;
  double max_pose_angle = 0.15;  // radians per axis-angle component
};

SyntheticScene make_synthetic_scene(const body::BodyTemplate& t,
                                    const SceneParams& p, uint64_t seed);

/// Bilinear crop-resize of an HxWxC image to out_res x out_res over the
/// pixel rectangle [x0,x1) x [y0,y1); samples clamp to the image.
Tensor crop_resize(const Tensor& img, const double rect[4], int64_t out_res);

/// Scene directory: body.lbm, gt.lha, scene.meta, viewNNN.{rgb,a}.limg.
/// read_scene followed by write_scene is byte-identical.
void write_scene(const SyntheticScene& s, const std::string& dir);
SyntheticScene read_scene(const std::string& dir);

// ---- optimization ----------------------------------------------------

struct AdamState {
  std::map<std::string, Tensor> m, v;
  int64_t step = 0;
};

using GradMap = std::map<std::string, Tensor>;

/// Scales every gradient by threshold/norm when the global L2 norm exceeds
/// the threshold; returns the pre-clip norm.
double clip_gradients(GradMap& grads, double threshold);

/// Decoupled-weight-decay Adam with bias correction. State tensors are
/// created lazily as zeros on first use.
void adamw_step(net::NetworkWeights& params, const GradMap& grads,
                AdamState& state, const TrainConfig& cfg);

/// Checkpoint (`.ckpt`): step counter, the seeds the run was started with,
/// weights, and optimizer moments. float64 payload, bit-exact roundtrip.
struct Checkpoint {
  int64_t step = 0;
  uint64_t init_seed = 0, step_seed = 0, percep_seed = 0;
  net::NetworkWeights weights;
  AdamState state;  // state.step mirrors `step`
};
void write_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint read_checkpoint(const std::string& path);

// ---- the fit loop ----------------------------------------------------

class Trainer {
 public:
  Trainer(TrainConfig cfg, SyntheticScene scene);

  /// One optimization step: sample source + targets, forward, loss,
  /// backward, clip, update. Deterministic per (state, step index).
  loss::LossReport train_step();

  int64_t step() const { return state_.step; }
  const net::NetworkWeights& weights() const { return weights_; }
  const TrainConfig& config() const { return cfg_; }
  const SyntheticScene& scene() const { return scene_; }

  /// Inference forward pass -> activated canonical Gaussians.
  splat::GaussianSet predict_canonical() const;

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

 private:
  TrainConfig cfg_;
  SyntheticScene scene_;
  net::NetworkWeights weights_;
  AdamState state_;
  loss::FeaturePyramid percep_;
  std::vector<Tensor> head_crops_;  // per view, at net.head_res
};

/// Per-view quality of renders of `canonical` posed into the given views.
struct EvalRow {
  int64_t view = 0;
  double psnr = 0, ssim = 0;
};
struct EvalReport {
  std::vector<EvalRow> rows;
  double mean_psnr = 0, mean_ssim = 0;

  std::string to_text() const;  // machine-readable, line oriented
};
EvalReport evaluate(const splat::GaussianSet& canonical,
                    const SyntheticScene& scene,
                    const std::vector<int64_t>& view_indices);

}  // namespace train
}  // namespace gav
