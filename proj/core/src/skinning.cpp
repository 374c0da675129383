#include "gav/skinning.hpp"

#include <cmath>
#include <queue>

#include "gav/ops.hpp"

namespace gav {
namespace skin {

namespace {

int64_t clamp_idx(int64_t i, int64_t r) { return i < 0 ? 0 : (i >= r ? r - 1 : i); }

}  // namespace

SkinField build_skin_field(const body::BodyTemplate& t, int64_t resolution,
                           int diffusion_steps, double margin) {
  if (resolution < 8) throw Error("build_skin_field: resolution must be >= 8");
  if (diffusion_steps < 0) throw Error("build_skin_field: negative diffusion steps");
  t.vertices.check_finite("skin field template vertices");
  int64_t v = t.num_vertices(), j = t.num_joints(), r = resolution;

  SkinField f;
  f.resolution = r;
  f.box_min = {t.vertices.at2(0, 0), t.vertices.at2(0, 1), t.vertices.at2(0, 2)};
  f.box_max = f.box_min;
  for (int64_t i = 1; i < v; ++i) {
    Vec3 p{t.vertices.at2(i, 0), t.vertices.at2(i, 1), t.vertices.at2(i, 2)};
    f.box_min = {std::min(f.box_min.x, p.x), std::min(f.box_min.y, p.y),
                 std::min(f.box_min.z, p.z)};
    f.box_max = {std::max(f.box_max.x, p.x), std::max(f.box_max.y, p.y),
                 std::max(f.box_max.z, p.z)};
  }
  f.box_min = f.box_min - Vec3{margin, margin, margin};
  f.box_max = f.box_max + Vec3{margin, margin, margin};

  Vec3 extent = f.box_max - f.box_min;
  auto voxel_of = [&](const Vec3& p) {
    int64_t ix = clamp_idx(static_cast<int64_t>((p.x - f.box_min.x) / extent.x * r), r);
    int64_t iy = clamp_idx(static_cast<int64_t>((p.y - f.box_min.y) / extent.y * r), r);
    int64_t iz = clamp_idx(static_cast<int64_t>((p.z - f.box_min.z) / extent.z * r), r);
    return (ix * r + iy) * r + iz;
  };

  int64_t cells = r * r * r;
  std::vector<double> seed(static_cast<size_t>(cells * j), 0.0);
  std::vector<int> seed_count(static_cast<size_t>(cells), 0);
  for (int64_t i = 0; i < v; ++i) {
    int64_t c = voxel_of({t.vertices.at2(i, 0), t.vertices.at2(i, 1), t.vertices.at2(i, 2)});
    for (int64_t k = 0; k < j; ++k) seed[c * j + k] += t.skin_weights.at2(i, k);
    seed_count[static_cast<size_t>(c)]++;
  }
  for (int64_t c = 0; c < cells; ++c)
    if (seed_count[static_cast<size_t>(c)] > 0)
      for (int64_t k = 0; k < j; ++k) seed[c * j + k] /= seed_count[static_cast<size_t>(c)];

  std::vector<double> cur = seed, next(seed.size());
  for (int step = 0; step < diffusion_steps; ++step) {
#pragma omp parallel for schedule(static)
    for (int64_t c = 0; c < cells; ++c) {
      int64_t ix = c / (r * r), iy = (c / r) % r, iz = c % r;
      if (seed_count[static_cast<size_t>(c)] > 0) {
        for (int64_t k = 0; k < j; ++k) next[c * j + k] = seed[c * j + k];
        continue;
      }
      int n = 1;
      for (int64_t k = 0; k < j; ++k) next[c * j + k] = cur[c * j + k];
      const int64_t off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                 {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
      for (const auto& o : off) {
        int64_t nx = ix + o[0], ny = iy + o[1], nz = iz + o[2];
        if (nx < 0 || nx >= r || ny < 0 || ny >= r || nz < 0 || nz >= r) continue;
        int64_t nc = (nx * r + ny) * r + nz;
        for (int64_t k = 0; k < j; ++k) next[c * j + k] += cur[nc * j + k];
        ++n;
      }
      for (int64_t k = 0; k < j; ++k) next[c * j + k] /= n;
    }
    std::swap(cur, next);
  }

  // voxels the diffusion never reached copy their nearest seed (multi-source
  // BFS in 6-connectivity, deterministic tie-break by push order)
  std::vector<int64_t> nearest(static_cast<size_t>(cells), -1);
  std::queue<int64_t> q;
  for (int64_t c = 0; c < cells; ++c)
    if (seed_count[static_cast<size_t>(c)] > 0) {
      nearest[static_cast<size_t>(c)] = c;
      q.push(c);
    }
  if (q.empty()) throw Error("build_skin_field: no seeded voxels");
  while (!q.empty()) {
    int64_t c = q.front();
    q.pop();
    int64_t ix = c / (r * r), iy = (c / r) % r, iz = c % r;
    const int64_t off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                               {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (const auto& o : off) {
      int64_t nx = ix + o[0], ny = iy + o[1], nz = iz + o[2];
      if (nx < 0 || nx >= r || ny < 0 || ny >= r || nz < 0 || nz >= r) continue;
      int64_t nc = (nx * r + ny) * r + nz;
      if (nearest[static_cast<size_t>(nc)] < 0) {
        nearest[static_cast<size_t>(nc)] = nearest[static_cast<size_t>(c)];
        q.push(nc);
      }
    }
  }

  f.weights = Tensor({r, r, r, j});
  for (int64_t c = 0; c < cells; ++c) {
    double s = 0;
    for (int64_t k = 0; k < j; ++k) s += cur[c * j + k];
    const double* row = s > 1e-12 ? &cur[c * j] : &seed[nearest[static_cast<size_t>(c)] * j];
    if (s <= 1e-12) {
      s = 0;
      for (int64_t k = 0; k < j; ++k) s += row[k];
    }
    for (int64_t k = 0; k < j; ++k) f.weights[c * j + k] = row[k] / s;
  }
  return f;
}

Tensor query_weights(const SkinField& field, const Tensor& points) {
  if (points.rank() != 2 || points.extent(1) != 3)
    throw Error("query_weights: points must be Nx3");
  points.check_finite("query points");
  int64_t n = points.extent(0), j = field.num_joints(), r = field.resolution;
  Vec3 extent = field.box_max - field.box_min;
  Vec3 cell{extent.x / r, extent.y / r, extent.z / r};
  Tensor out({n, j});
  for (int64_t i = 0; i < n; ++i) {
    // continuous coordinates in voxel-center space
    double u[3] = {(points.at2(i, 0) - field.box_min.x) / cell.x - 0.5,
                   (points.at2(i, 1) - field.box_min.y) / cell.y - 0.5,
                   (points.at2(i, 2) - field.box_min.z) / cell.z - 0.5};
    int64_t i0[3];
    double fr[3];
    for (int d = 0; d < 3; ++d) {
      double fl = std::floor(u[d]);
      if (fl < 0) {
        i0[d] = 0;
        fr[d] = 0.0;
      } else if (fl >= static_cast<double>(r - 1)) {
        i0[d] = r - 1;
        fr[d] = 0.0;
      } else {
        i0[d] = static_cast<int64_t>(fl);
        fr[d] = u[d] - fl;
      }
    }
    double total = 0;
    for (int corner = 0; corner < 8; ++corner) {
      int64_t ix = i0[0] + ((corner >> 2) & 1);
      int64_t iy = i0[1] + ((corner >> 1) & 1);
      int64_t iz = i0[2] + (corner & 1);
      ix = clamp_idx(ix, r);
      iy = clamp_idx(iy, r);
      iz = clamp_idx(iz, r);
      double w = (((corner >> 2) & 1) ? fr[0] : 1 - fr[0]) *
                 (((corner >> 1) & 1) ? fr[1] : 1 - fr[1]) *
                 ((corner & 1) ? fr[2] : 1 - fr[2]);
      if (w == 0) continue;
      const double* row = field.weights.data() + (((ix * r) + iy) * r + iz) * j;
      for (int64_t k = 0; k < j; ++k) out.at2(i, k) += w * row[k];
    }
    for (int64_t k = 0; k < j; ++k) total += out.at2(i, k);
    if (total <= 0) throw Error("query_weights: empty interpolated row");
    for (int64_t k = 0; k < j; ++k) out.at2(i, k) /= total;
  }
  return out;
}

Tensor blend_transforms(const Tensor& weights, const std::vector<Mat4>& transforms) {
  int64_t n = weights.extent(0), j = weights.extent(1);
  if (static_cast<int64_t>(transforms.size()) != j)
    throw Error("blend_transforms: weight columns and transform count differ");
  Tensor mats({n, 3, 4});
  for (int64_t i = 0; i < n; ++i) {
    Mat3 lin{};
    // blended as I + sum w_j (M_j - I): identical since rows sum to 1, but
    // exact when every transform is the identity
    for (int row = 0; row < 3; ++row) mats[(i * 3 + row) * 4 + row] = 1.0;
    for (int64_t k = 0; k < j; ++k) {
      double w = weights.at2(i, k);
      if (w == 0) continue;
      const Mat4& m = transforms[static_cast<size_t>(k)];
      for (int row = 0; row < 3; ++row)
        for (int col = 0; col < 4; ++col)
          mats[(i * 3 + row) * 4 + col] += w * (m.at(row, col) - (row == col ? 1.0 : 0.0));
    }
    for (int row = 0; row < 3; ++row)
      for (int col = 0; col < 3; ++col) lin.at(row, col) = mats[(i * 3 + row) * 4 + col];
    if (lin.det() <= 1e-8)
      throw Error("pose blend degenerate for gaussian " + std::to_string(i));
  }
  return mats;
}

namespace {

Tensor blended_rotation_quats(const Tensor& mats) {
  int64_t n = mats.extent(0);
  Tensor qc({n, 4});
  for (int64_t i = 0; i < n; ++i) {
    Mat3 lin;
    for (int row = 0; row < 3; ++row)
      for (int col = 0; col < 3; ++col) lin.at(row, col) = mats[(i * 3 + row) * 4 + col];
    Quat q = mat3_to_quat(polar_rotation(lin));
    for (int k = 0; k < 4; ++k) qc.at2(i, k) = q[static_cast<size_t>(k)];
  }
  return qc;
}

}  // namespace

splat::GaussianSet pose_gaussians(const splat::GaussianSet& g, const Tensor& weights,
                                  const std::vector<Mat4>& transforms) {
  int64_t n = g.count();
  if (weights.shape() != Shape{n, static_cast<int64_t>(transforms.size())})
    throw Error("pose_gaussians: weights must be NxJ");
  Tensor mats = blend_transforms(weights, transforms);
  Tensor qc = blended_rotation_quats(mats);

  splat::GaussianSet out = g;
  for (int64_t i = 0; i < n; ++i) {
    double p[3] = {g.positions.at2(i, 0), g.positions.at2(i, 1), g.positions.at2(i, 2)};
    for (int row = 0; row < 3; ++row)
      out.positions.at2(i, row) = mats[(i * 3 + row) * 4 + 0] * p[0] +
                                  mats[(i * 3 + row) * 4 + 1] * p[1] +
                                  mats[(i * 3 + row) * 4 + 2] * p[2] +
                                  mats[(i * 3 + row) * 4 + 3];
    Quat a{qc.at2(i, 0), qc.at2(i, 1), qc.at2(i, 2), qc.at2(i, 3)};
    Quat b{g.rotations.at2(i, 0), g.rotations.at2(i, 1), g.rotations.at2(i, 2),
           g.rotations.at2(i, 3)};
    Quat q = quat_normalized(quat_mul(a, b));
    for (int k = 0; k < 4; ++k) out.rotations.at2(i, k) = q[static_cast<size_t>(k)];
  }
  return out;
}

PosedVars pose_gaussians(const Var& positions, const Var& rotations, const Tensor& weights,
                         const std::vector<Mat4>& transforms) {
  Tensor mats = blend_transforms(weights, transforms);
  Tensor qc = blended_rotation_quats(mats);
  PosedVars out;
  out.positions = ops::affine_rows(positions, mats);
  out.rotations = ops::normalize_rows(ops::quat_mul_left(qc, rotations));
  return out;
}

}  // namespace skin
}  // namespace gav
