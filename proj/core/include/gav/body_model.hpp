#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gav/geometry.hpp"
#include "gav/tensor.hpp"

namespace gav {
namespace body {

enum Region : uint8_t { kBody = 0, kHead = 1 };

/// Simplified parametric body: template mesh, skeleton, blendshapes, skin
/// weights, joint regressor, per-vertex head/body labels. Immutable after
/// load; all operations on it are pure.
struct BodyTemplate {
  Tensor vertices;                 // V x 3, canonical pose, meters
  std::vector<uint32_t> faces;     // F*3 vertex indices
  Tensor joints;                   // J x 3 rest positions
  std::vector<int32_t> parents;    // J entries; root sentinel -1; parent[j] < j
  Tensor skin_weights;             // V x J, rows nonnegative, sum 1
  Tensor shape_basis;              // B x V x 3 displacement directions
  Tensor joint_regressor;          // J x V, rows sum 1
  std::vector<uint8_t> region;     // V entries of Region

  int64_t num_vertices() const { return vertices.shape().empty() ? 0 : vertices.shape()[0]; }
  int64_t num_faces() const { return static_cast<int64_t>(faces.size()) / 3; }
  int64_t num_joints() const { return joints.shape().empty() ? 0 : joints.shape()[0]; }
  int64_t num_shape_dims() const {
    return shape_basis.shape().empty() ? 0 : shape_basis.shape()[0];
  }

  /// Checks every structural invariant; throws Error naming field and index.
  void validate() const;
};

struct Pose {
  Tensor axis_angle;        // J x 3 radians, relative to rest
  Vec3 root_translation{};  // meters

  static Pose rest(int64_t joints) { return Pose{Tensor({joints, 3}), {}}; }
};

struct SampledPoints {
  Tensor positions;                 // N x 3, canonical space
  std::vector<int64_t> face_index;  // N
  Tensor barycentric;               // N x 3, nonnegative, rows sum 1
  std::vector<uint8_t> region;      // N entries of Region

  int64_t count() const { return positions.shape().empty() ? 0 : positions.shape()[0]; }
};

/// Body-model container (`.lbm`): little-endian, magic "LBM1", tagged
/// length-prefixed sections. Validates all invariants at load.
BodyTemplate load_body_model(const std::string& path);
void save_body_model(const BodyTemplate& t, const std::string& path);

/// vertices + sum_b beta_b * basis_b.
Tensor apply_shape(const BodyTemplate& t, const Tensor& beta);

/// Joint positions re-derived from (shaped) vertices via the regressor.
Tensor regress_joints(const BodyTemplate& t, const Tensor& vertices);

/// Per-joint world transforms relative to the rest pose: the identity pose
/// maps every joint to the identity. Rotations act about rest joint origins,
/// composed parent to child; root translation applies globally.
std::vector<Mat4> forward_kinematics(const BodyTemplate& t, const Pose& pose);

/// Area-weighted surface sampling, uniform in barycentric coordinates,
/// deterministic for a fixed seed. Point region label is the majority label
/// of its face's vertices (ties resolve to head).
SampledPoints sample_surface_points(const BodyTemplate& t, int64_t n, uint64_t seed);

/// Parameters of the procedural humanoid (capsule limbs, tube torso, sphere
/// head). The default configuration is the bundled "minibody" test asset:
/// V=402, J=16, B=4.
struct GeneratorParams {
  int head_stacks = 7;
  int head_slices = 9;
  int torso_rings = 8;
  int torso_slices = 10;
  int limb_rings = 8;
  int limb_slices = 8;
};

BodyTemplate generate_humanoid(const GeneratorParams& p = {});

}  // namespace body
}  // namespace gav
