#pragma once

#include <vector>

#include "gav/body_model.hpp"
#include "gav/gaussians.hpp"
#include "gav/geometry.hpp"
#include "gav/tape.hpp"

namespace gav {
namespace skin {

/// Volumetric skinning-weight field on a regular grid of voxel centers.
/// Immutable after construction; queries are pure.
struct SkinField {
  Vec3 box_min, box_max;  // canonical-space bounds, margin included
  int64_t resolution = 0;
  Tensor weights;  // R x R x R x J, rows nonnegative, sum 1

  int64_t num_joints() const {
    return weights.shape().size() == 4 ? weights.shape()[3] : 0;
  }
};

/// Builds the field by seeding voxels that contain template vertices with
/// those vertices' weight rows, smoothing with 6-neighbor averaging (seeds
/// re-clamped each step), and filling voxels the diffusion never reached
/// with the row of their nearest seed.
SkinField build_skin_field(const body::BodyTemplate& t, int64_t resolution = 64,
                           int diffusion_steps = 30, double margin = 0.1);

/// Trilinear interpolation at voxel centers; out-of-box points clamp to the
/// boundary; each result row is renormalized.
Tensor query_weights(const SkinField& field, const Tensor& points);

/// Linear Blend Skinning of a Gaussian set. Positions map through the
/// blended matrix M = sum_j w_j M_j; rotations are left-multiplied by the
/// quaternion of M's polar rotation factor. Scales, opacities and SH
/// coefficients are pose-invariant.
splat::GaussianSet pose_gaussians(const splat::GaussianSet& g, const Tensor& weights,
                                  const std::vector<Mat4>& transforms);

/// Per-Gaussian blended matrices as an N x 3 x 4 tensor (top three rows of M).
/// Throws if any blend is degenerate (det <= 1e-8), naming the index.
Tensor blend_transforms(const Tensor& weights, const std::vector<Mat4>& transforms);

/// Differentiable posing path. The skin weights and joint transforms are
/// treated as constants of the forward pass; gradients flow to the canonical
/// positions and rotations only.
struct PosedVars {
  Var positions;  // N x 3
  Var rotations;  // N x 4, unit rows
};
PosedVars pose_gaussians(const Var& positions, const Var& rotations, const Tensor& weights,
                         const std::vector<Mat4>& transforms);

}  // namespace skin
}  // namespace gav
