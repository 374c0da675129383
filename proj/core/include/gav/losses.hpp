#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gav/tape.hpp"
#include "gav/tensor.hpp"

namespace gav {
namespace loss {

/// Weighting of the training objective. Photometric terms compare rendered
/// images against targets; the two canonical-space regularizers keep the
/// predicted Gaussians compact: isotropy pulls every scale triplet toward
/// (scale_target)^2 variance, and the offset hinge penalizes anchor offsets
/// whose norm exceeds offset_limit.
struct LossWeights {
  double rgb = 1.0;
  double mask = 0.5;
  double perceptual = 1.0;
  double isotropy = 50.0;
  double offset = 10.0;
  double offset_limit = 0.0525;  // meters, hinge threshold
  double scale_target = 1.0;     // meters, target standard deviation
};

/// Per-term values for one step. `total` is assembled with exactly the same
/// floating-point operation order as the differentiable assembly.
struct LossReport {
  double color = 0, mask = 0, perceptual = 0, isotropy = 0, offset = 0;
  double total = 0;

  std::string log_line(int64_t step) const;
};

/// Fixed, randomly initialized convolutional feature pyramid used as a
/// deterministic perceptual distance: at each of three scales the image is
/// mapped through one 3x3 conv (3 -> 8 channels) + tanh, feature maps are
/// compared by mean squared error, and the image is 2x2 average-pooled
/// before the next scale. The kernels are a pure function of the seed.
struct FeaturePyramid {
  std::vector<Tensor> kernels;  // one [3,3,3,8] kernel per scale
  uint64_t seed = 0;

  static FeaturePyramid make(uint64_t seed);
  int64_t scales() const { return static_cast<int64_t>(kernels.size()); }
};

/// Mean absolute error over all pixels and channels. Shapes must match.
Var color_loss(const Var& pred, const Var& target);

/// Mean absolute error between single-channel alpha/mask images.
Var mask_loss(const Var& pred_alpha, const Var& target_mask);

/// Multi-scale feature distance described at FeaturePyramid. Requires both
/// image extents divisible by 2^(scales-1); symmetric in its arguments.
Var perceptual_loss(const Var& pred, const Var& target,
                    const FeaturePyramid& net);

/// Anisotropy penalty: mean over Gaussians of
/// sum_k (s_k^2 / t^2 - 1)^2, i.e. the squared Frobenius distance between
/// the t^2-normalized covariance eigenvalues and the identity. Rotation
/// never enters (orthogonal invariance), so only scales are penalized.
Var isotropy_loss(const Var& scales, double target_scale);

/// Hinged offset penalty: mean over rows of max(||row||_2 - limit, 0).
/// Zero (with zero gradient) strictly inside the hinge.
Var offset_loss(const Var& offsets, double limit);

/// All terms plus the weighted sum, differentiable end-to-end.
struct LossVars {
  Var color, mask, perceptual, isotropy, offset;
  Var total;
};

LossVars total_loss(const Var& pred_rgb, const Var& pred_alpha,
                    const Tensor& target_rgb, const Tensor& target_mask,
                    const Var& scales, const Var& offsets,
                    const FeaturePyramid& net, const LossWeights& w);

/// Weighted assembly from already-computed scalar terms, in the fixed
/// operation order shared with report_of.
Var assemble_total(const Var& color, const Var& mask, const Var& perceptual,
                   const Var& isotropy, const Var& offset,
                   const LossWeights& w);

LossReport report_of(const LossVars& v, const LossWeights& w);

/// Peak signal-to-noise ratio in dB over [0,1] images: 10*log10(1/MSE),
/// capped at 100 dB when MSE < 1e-10.
double psnr(const Tensor& pred, const Tensor& target);

/// Structural similarity with an 11x11 Gaussian window (sigma 1.5),
/// K1=0.01, K2=0.03, dynamic range 1, averaged over valid window positions
/// and channels. Requires extents >= 11.
double ssim(const Tensor& pred, const Tensor& target);

}  // namespace loss
}  // namespace gav
