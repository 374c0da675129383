#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gav/geometry.hpp"
#include "gav/tape.hpp"
#include "gav/tensor.hpp"

namespace gav {
namespace splat {

/// A set of anisotropic 3D Gaussians. Immutable value; every operation on it
/// is pure. sh_coeffs layout is coefficient-major: C/3 real spherical-harmonic
/// coefficients, RGB each, degree 0 first.
struct GaussianSet {
  Tensor positions;   // N x 3, meters
  Tensor rotations;   // N x 4 unit quaternions (w,x,y,z)
  Tensor scales;      // N x 3, meters, > 0
  Tensor opacities;   // N x 1, in [0,1]
  Tensor sh_coeffs;   // N x C, C = 3*(deg+1)^2, deg 0 or 1

  int64_t count() const { return positions.shape().empty() ? 0 : positions.shape()[0]; }
  int64_t sh_dim() const { return sh_coeffs.shape().size() < 2 ? 0 : sh_coeffs.shape()[1]; }
  int sh_degree() const { return sh_dim() == 12 ? 1 : 0; }

  void validate() const;  // throws Error naming the violated field
};

/// Unconstrained per-point network outputs, before activation.
struct RawGaussianParams {
  Tensor offset_raw;    // N x 3
  Tensor rotation_raw;  // N x 4
  Tensor scale_raw;     // N x 3
  Tensor opacity_raw;   // N x 1
  Tensor sh_raw;        // N x C
};

struct ActivationConfig {
  double offset_cap = 0.06;   // meters; hard bound on |p - anchor|
  double scale_floor = 1e-4;  // meters
};

/// Maps arbitrary finite raw values to a valid GaussianSet:
/// p = x + cap*tanh(dp), r normalized (zero rows -> identity), sigma =
/// floor + softplus, rho = sigmoid, sh passed through.
GaussianSet activate_raw(const RawGaussianParams& raw, const Tensor& anchors,
                         const ActivationConfig& cfg = {});

/// Differentiable counterpart used inside the network graph. Rotation rows
/// here must be bounded away from zero (the regression head biases the w
/// channel), since plain row normalization is used.
struct GaussianVars {
  Var positions, rotations, scales, opacities, sh_coeffs;
};
GaussianVars activate_raw(const Var& offset_raw, const Var& rotation_raw,
                          const Var& scale_raw, const Var& opacity_raw, const Var& sh_raw,
                          const Tensor& anchors, const ActivationConfig& cfg = {});

/// S = R diag(sigma^2) R^T for Gaussian i.
Mat3 covariance_of(const GaussianSet& g, int64_t i);

/// color = clamp(0.5 + sum f_lm Y_lm(dir), 0, 1); sh has sh_dim entries.
void eval_sh(const double* sh, int64_t sh_dim, const Vec3& view_dir, double rgb[3]);

/// Optional per-Gaussian skinning data carried in the avatar file.
struct AvatarSkin {
  std::vector<uint32_t> joint_ids;  // J entries
  Tensor weights;                   // N x J, rows sum 1
};

/// Avatar container (`.lha`): little-endian, magic "LHA1", f32 payload.
void write_avatar(const GaussianSet& g, const std::optional<AvatarSkin>& skin,
                  const std::string& path);
std::pair<GaussianSet, std::optional<AvatarSkin>> read_avatar(const std::string& path);

}  // namespace splat
}  // namespace gav
