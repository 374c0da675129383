#include "gav/losses.hpp"

#include <cmath>
#include <cstdio>

#include "gav/ops.hpp"
#include "gav/rng.hpp"

namespace gav {
namespace loss {

namespace {

void check_same_shape(const Var& a, const Var& b, const char* what) {
  if (a.shape() != b.shape())
    throw Error(std::string(what) + ": shape mismatch, " +
                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void check_image(const Var& v, int64_t channels, const char* what) {
  if (v.shape().size() != 3 || v.shape()[2] != channels)
    throw Error(std::string(what) + ": expected HxWx" +
                std::to_string(channels) + " image, got " +
                shape_str(v.shape()));
}

double scalar_of(const Var& v) { return v.value()[0]; }

}  // namespace

std::string LossReport::log_line(int64_t step) const {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "step=%lld color=%.17g mask=%.17g perceptual=%.17g "
                "isotropy=%.17g offset=%.17g total=%.17g",
                static_cast<long long>(step), color, mask, perceptual,
                isotropy, offset, total);
  return buf;
}

FeaturePyramid FeaturePyramid::make(uint64_t seed) {
  FeaturePyramid net;
  net.seed = seed;
  Rng rng(seed);
  const double fan_in_scale = 1.0 / std::sqrt(27.0);  // 3x3x3 inputs per tap
  for (int s = 0; s < 3; ++s) {
    Tensor k({3, 3, 3, 8});
    for (int64_t i = 0; i < k.size(); ++i) k[i] = rng.normal() * fan_in_scale;
    net.kernels.push_back(std::move(k));
  }
  return net;
}

Var color_loss(const Var& pred, const Var& target) {
  check_image(pred, 3, "color_loss");
  check_same_shape(pred, target, "color_loss");
  return ops::mean_all(ops::abs(ops::sub(pred, target)));
}

Var mask_loss(const Var& pred_alpha, const Var& target_mask) {
  check_image(pred_alpha, 1, "mask_loss");
  check_same_shape(pred_alpha, target_mask, "mask_loss");
  return ops::mean_all(ops::abs(ops::sub(pred_alpha, target_mask)));
}

Var perceptual_loss(const Var& pred, const Var& target,
                    const FeaturePyramid& net) {
  check_image(pred, 3, "perceptual_loss");
  check_same_shape(pred, target, "perceptual_loss");
  int64_t scales = net.scales();
  int64_t divisor = int64_t{1} << (scales - 1);
  if (pred.shape()[0] % divisor != 0 || pred.shape()[1] % divisor != 0)
    throw Error("perceptual_loss: image extents must be divisible by " +
                std::to_string(divisor) + ", got " + shape_str(pred.shape()));
  Var a = pred, b = target;
  Var acc = constant(0.0);
  for (int64_t s = 0; s < scales; ++s) {
    Var fa = ops::tanh(ops::conv2d_const(a, net.kernels[s]));
    Var fb = ops::tanh(ops::conv2d_const(b, net.kernels[s]));
    acc = ops::add(acc, ops::mean_all(ops::square(ops::sub(fa, fb))));
    if (s + 1 < scales) {
      a = ops::avg_pool2(a);
      b = ops::avg_pool2(b);
    }
  }
  return ops::mul(acc, 1.0 / static_cast<double>(scales));
}

Var isotropy_loss(const Var& scales, double target_scale) {
  if (scales.shape().size() != 2 || scales.shape()[1] != 3)
    throw Error("isotropy_loss: expected Nx3 scales, got " +
                shape_str(scales.shape()));
  if (!(target_scale > 0)) throw Error("isotropy_loss: target must be > 0");
  int64_t n = scales.shape()[0];
  // || R diag(s^2) R^T / t^2 - I ||_F^2 = sum_k (s_k^2/t^2 - 1)^2 for any
  // rotation R, so the penalty is computed on the scales alone.
  Var ratio = ops::mul(ops::square(scales), 1.0 / (target_scale * target_scale));
  Var sq = ops::square(ops::sub(ratio, 1.0));
  return ops::mul(ops::sum_all(sq), 1.0 / static_cast<double>(n));
}

Var offset_loss(const Var& offsets, double limit) {
  if (offsets.shape().size() != 2 || offsets.shape()[1] != 3)
    throw Error("offset_loss: expected Nx3 offsets, got " +
                shape_str(offsets.shape()));
  if (!(limit > 0)) throw Error("offset_loss: limit must be > 0");
  // The epsilon keeps sqrt defined for all-zero rows; it is far below one
  // ulp of any norm that clears the hinge, so values are unaffected.
  Var sumsq = ops::reduce(ops::ReduceOp::Sum, ops::square(offsets), 1);
  Var norms = ops::sqrt(ops::add(sumsq, 1e-24));
  return ops::mean_all(ops::relu(ops::sub(norms, limit)));
}

Var assemble_total(const Var& color, const Var& mask, const Var& perceptual,
                   const Var& isotropy, const Var& offset,
                   const LossWeights& w) {
  Var t = ops::add(ops::mul(color, w.rgb), ops::mul(mask, w.mask));
  t = ops::add(t, ops::mul(perceptual, w.perceptual));
  t = ops::add(t, ops::mul(isotropy, w.isotropy));
  t = ops::add(t, ops::mul(offset, w.offset));
  return t;
}

LossVars total_loss(const Var& pred_rgb, const Var& pred_alpha,
                    const Tensor& target_rgb, const Tensor& target_mask,
                    const Var& scales, const Var& offsets,
                    const FeaturePyramid& net, const LossWeights& w) {
  LossVars out;
  Var trgb = constant(target_rgb);
  Var tmask = constant(target_mask);
  out.color = color_loss(pred_rgb, trgb);
  out.mask = mask_loss(pred_alpha, tmask);
  out.perceptual = perceptual_loss(pred_rgb, trgb, net);
  out.isotropy = isotropy_loss(scales, w.scale_target);
  out.offset = offset_loss(offsets, w.offset_limit);
  out.total =
      assemble_total(out.color, out.mask, out.perceptual, out.isotropy,
                     out.offset, w);
  return out;
}

LossReport report_of(const LossVars& v, const LossWeights& w) {
  LossReport r;
  r.color = scalar_of(v.color);
  r.mask = scalar_of(v.mask);
  r.perceptual = scalar_of(v.perceptual);
  r.isotropy = scalar_of(v.isotropy);
  r.offset = scalar_of(v.offset);
  // Same operation order as assemble_total so the decomposition identity
  // holds bitwise.
  double t = r.color * w.rgb + r.mask * w.mask;
  t = t + r.perceptual * w.perceptual;
  t = t + r.isotropy * w.isotropy;
  t = t + r.offset * w.offset;
  r.total = t;
  return r;
}

double psnr(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape())
    throw Error("psnr: shape mismatch, " + shape_str(pred.shape()) + " vs " +
                shape_str(target.shape()));
  double mse = 0;
  for (int64_t i = 0; i < pred.size(); ++i) {
    double d = pred[i] - target[i];
    mse += d * d;
  }
  mse /= static_cast<double>(pred.size());
  if (mse < 1e-10) return 100.0;
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape())
    throw Error("ssim: shape mismatch, " + shape_str(pred.shape()) + " vs " +
                shape_str(target.shape()));
  if (pred.rank() != 3)
    throw Error("ssim: expected HxWxC images, got " + shape_str(pred.shape()));
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;  // (K1 * L)^2, L = 1
  constexpr double kC2 = 0.03 * 0.03;
  int64_t h = pred.extent(0), w = pred.extent(1), c = pred.extent(2);
  if (h < kWin || w < kWin)
    throw Error("ssim: image must be at least 11x11, got " +
                shape_str(pred.shape()));

  double win[kWin][kWin];
  double wsum = 0;
  for (int i = 0; i < kWin; ++i)
    for (int j = 0; j < kWin; ++j) {
      double dy = i - (kWin - 1) / 2.0, dx = j - (kWin - 1) / 2.0;
      win[i][j] = std::exp(-(dy * dy + dx * dx) / (2.0 * kSigma * kSigma));
      wsum += win[i][j];
    }
  for (int i = 0; i < kWin; ++i)
    for (int j = 0; j < kWin; ++j) win[i][j] /= wsum;

  double acc = 0;
  int64_t count = 0;
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int64_t y = 0; y + kWin <= h; ++y) {
      for (int64_t x = 0; x + kWin <= w; ++x) {
        double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
        for (int i = 0; i < kWin; ++i) {
          for (int j = 0; j < kWin; ++j) {
            double wv = win[i][j];
            double a = pred[((y + i) * w + (x + j)) * c + ch];
            double b = target[((y + i) * w + (x + j)) * c + ch];
            mx += wv * a;
            my += wv * b;
            xx += wv * a * a;
            yy += wv * b * b;
            xy += wv * a * b;
          }
        }
        double vx = xx - mx * mx, vy = yy - my * my, cov = xy - mx * my;
        double num = (2.0 * mx * my + kC1) * (2.0 * cov + kC2);
        double den = (mx * mx + my * my + kC1) * (vx + vy + kC2);
        acc += num / den;
        ++count;
      }
    }
  }
  return acc / static_cast<double>(count);
}

}  // namespace loss
}  // namespace gav
