#pragma once

#include <array>
#include <optional>

#include "gav/gaussians.hpp"
#include "gav/geometry.hpp"
#include "gav/tape.hpp"
#include "gav/tensor.hpp"

namespace gav {
namespace raster {

struct Camera {
  double fx = 0, fy = 0, cx = 0, cy = 0;  // pixels
  Mat4 world_to_camera = Mat4::identity();
  int64_t width = 0, height = 0;
  double near = 0.01;  // meters

  Vec3 center() const;    // camera origin in world space
  void validate() const;  // fx,fy>0, near>0, orthonormal rotation
};

/// A Gaussian after projection to the screen. cov2d is stored as (a,b,c) for
/// [[a,b],[b,c]], low-pass floor already added.
struct Splat2D {
  double mean_x = 0, mean_y = 0;
  double cov_a = 0, cov_b = 0, cov_c = 0;
  double depth = 0;
  double rgb[3] = {0, 0, 0};
  double opacity = 0;
};

/// Perspective projection of Gaussian i; nullopt when the splat is culled
/// (behind the near plane or its conservative footprint misses the image).
std::optional<Splat2D> project_gaussian(const splat::GaussianSet& g, int64_t i,
                                        const Camera& cam);

struct RenderResult {
  Tensor rgb;    // H x W x 3
  Tensor alpha;  // H x W x 1
};

/// Reference renderer: per-pixel loop over every projected splat in global
/// depth order, no tiling, no early exit. The test oracle for render().
RenderResult brute_force_render(const splat::GaussianSet& g, const Camera& cam,
                                const std::array<double, 3>& background);

/// Tile-based renderer, value-level.
RenderResult render(const splat::GaussianSet& g, const Camera& cam,
                    const std::array<double, 3>& background);

/// Differentiable tile-based renderer. Gradients flow to all five inputs;
/// depth order and culling are constants of the forward pass.
struct RenderVars {
  Var rgb;    // H x W x 3
  Var alpha;  // H x W x 1
};
RenderVars render(const Var& positions, const Var& rotations, const Var& scales,
                  const Var& opacities, const Var& sh_coeffs, const Camera& cam,
                  const std::array<double, 3>& background);

}  // namespace raster
}  // namespace gav
