#include "gav/gaussians.hpp"

#include <algorithm>
#include <cmath>

#include "gav/binio.hpp"
#include "gav/ops.hpp"

namespace gav {
namespace splat {

namespace {
constexpr uint32_t kVersion = 1;
// real SH basis constants, degree 0 and 1
constexpr double kSh0 = 0.28209479177387814;
constexpr double kSh1 = 0.4886025119029199;
}  // namespace

void GaussianSet::validate() const {
  int64_t n = count(), c = sh_dim();
  if (positions.shape() != Shape{n, 3}) throw Error("gaussians: positions must be Nx3");
  if (rotations.shape() != Shape{n, 4}) throw Error("gaussians: rotations must be Nx4");
  if (scales.shape() != Shape{n, 3}) throw Error("gaussians: scales must be Nx3");
  if (opacities.shape() != Shape{n, 1}) throw Error("gaussians: opacities must be Nx1");
  if (c != 3 && c != 12) throw Error("gaussians: sh dimension must be 3 or 12");
  if (sh_coeffs.shape() != Shape{n, c}) throw Error("gaussians: sh_coeffs must be NxC");
  positions.check_finite("gaussian positions");
  sh_coeffs.check_finite("gaussian sh coefficients");
  for (int64_t i = 0; i < n; ++i) {
    double q = 0;
    for (int64_t k = 0; k < 4; ++k) q += rotations.at2(i, k) * rotations.at2(i, k);
    if (!std::isfinite(q) || std::abs(std::sqrt(q) - 1.0) > 1e-6)
      throw Error("gaussians: rotation row " + std::to_string(i) + " not unit-norm");
    for (int64_t k = 0; k < 3; ++k) {
      double s = scales.at2(i, k);
      if (!std::isfinite(s) || s <= 0)
        throw Error("gaussians: non-positive scale in row " + std::to_string(i));
    }
    double o = opacities.at2(i, 0);
    if (!std::isfinite(o) || o < 0 || o > 1)
      throw Error("gaussians: opacity out of [0,1] in row " + std::to_string(i));
  }
}

GaussianSet activate_raw(const RawGaussianParams& raw, const Tensor& anchors,
                         const ActivationConfig& cfg) {
  int64_t n = anchors.shape().empty() ? 0 : anchors.shape()[0];
  if (anchors.shape() != Shape{n, 3}) throw Error("activate_raw: anchors must be Nx3");
  if (raw.offset_raw.shape() != Shape{n, 3} || raw.rotation_raw.shape() != Shape{n, 4} ||
      raw.scale_raw.shape() != Shape{n, 3} || raw.opacity_raw.shape() != Shape{n, 1})
    throw Error("activate_raw: raw parameter shapes do not match anchors");
  raw.offset_raw.check_finite("raw offsets");
  raw.rotation_raw.check_finite("raw rotations");
  raw.scale_raw.check_finite("raw scales");
  raw.opacity_raw.check_finite("raw opacities");
  raw.sh_raw.check_finite("raw sh coefficients");

  GaussianSet g;
  g.positions = Tensor({n, 3});
  g.rotations = Tensor({n, 4});
  g.scales = Tensor({n, 3});
  g.opacities = Tensor({n, 1});
  g.sh_coeffs = raw.sh_raw;
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t k = 0; k < 3; ++k) {
      g.positions.at2(i, k) =
          anchors.at2(i, k) + cfg.offset_cap * std::tanh(raw.offset_raw.at2(i, k));
      double s = raw.scale_raw.at2(i, k);
      // overflow-safe softplus
      double sp = s > 30 ? s : std::log1p(std::exp(s));
      g.scales.at2(i, k) = cfg.scale_floor + sp;
    }
    double norm = 0;
    for (int64_t k = 0; k < 4; ++k)
      norm += raw.rotation_raw.at2(i, k) * raw.rotation_raw.at2(i, k);
    norm = std::sqrt(norm);
    if (norm == 0) {
      g.rotations.at2(i, 0) = 1;
    } else {
      for (int64_t k = 0; k < 4; ++k)
        g.rotations.at2(i, k) = raw.rotation_raw.at2(i, k) / norm;
    }
    double o = raw.opacity_raw.at2(i, 0);
    g.opacities.at2(i, 0) = 1.0 / (1.0 + std::exp(-o));
  }
  return g;
}

GaussianVars activate_raw(const Var& offset_raw, const Var& rotation_raw,
                          const Var& scale_raw, const Var& opacity_raw, const Var& sh_raw,
                          const Tensor& anchors, const ActivationConfig& cfg) {
  using namespace ops;
  GaussianVars g;
  g.positions = add(constant(anchors), mul(tanh(offset_raw), cfg.offset_cap));
  g.rotations = normalize_rows(rotation_raw);
  g.scales = add(softplus(scale_raw), cfg.scale_floor);
  g.opacities = sigmoid(opacity_raw);
  g.sh_coeffs = sh_raw;
  return g;
}

Mat3 covariance_of(const GaussianSet& g, int64_t i) {
  if (i < 0 || i >= g.count()) throw Error("covariance_of: index out of range");
  Quat q{g.rotations.at2(i, 0), g.rotations.at2(i, 1), g.rotations.at2(i, 2),
         g.rotations.at2(i, 3)};
  Mat3 r = quat_to_mat3(q);
  Mat3 rd;  // R * diag(sigma^2)
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 3; ++col)
      rd.at(row, col) = r.at(row, col) * g.scales.at2(i, col) * g.scales.at2(i, col);
  return rd * r.transposed();
}

void eval_sh(const double* sh, int64_t sh_dim, const Vec3& view_dir, double rgb[3]) {
  double n = view_dir.norm();
  if (n < 1e-12) throw Error("eval_sh: zero-length view direction");
  if (std::abs(n - 1.0) > 1e-6) throw Error("eval_sh: view direction not unit-norm");
  for (int ch = 0; ch < 3; ++ch) {
    double c = 0.5 + kSh0 * sh[ch];
    if (sh_dim == 12)
      c += kSh1 * (-view_dir.y * sh[3 + ch] + view_dir.z * sh[6 + ch] -
                   view_dir.x * sh[9 + ch]);
    rgb[ch] = std::clamp(c, 0.0, 1.0);
  }
}

void write_avatar(const GaussianSet& g, const std::optional<AvatarSkin>& skin,
                  const std::string& path) {
  g.validate();
  uint32_t n = static_cast<uint32_t>(g.count());
  BinWriter w;
  w.tag("LHA1");
  w.u32(kVersion);
  w.u32(n);
  w.u32(static_cast<uint32_t>(g.sh_dim()));
  w.f32_array(g.positions);
  w.f32_array(g.rotations);
  w.f32_array(g.scales);
  w.f32_array(g.opacities);
  w.f32_array(g.sh_coeffs);
  if (skin) {
    uint32_t j = static_cast<uint32_t>(skin->joint_ids.size());
    if (skin->weights.shape() != Shape{static_cast<int64_t>(n), static_cast<int64_t>(j)})
      throw Error("write_avatar: skin weights must be NxJ");
    w.u8(1);
    w.u32(j);
    for (uint32_t id : skin->joint_ids) w.u32(id);
    w.f32_array(skin->weights);
  } else {
    w.u8(0);
  }
  w.save(path);
}

std::pair<GaussianSet, std::optional<AvatarSkin>> read_avatar(const std::string& path) {
  BinReader r = BinReader::from_file(path);
  r.set_context("avatar header");
  if (r.tag() != "LHA1") throw Error(path + ": bad magic, not an avatar file");
  uint32_t ver = r.u32();
  if (ver != kVersion) throw Error(path + ": unsupported version " + std::to_string(ver));
  int64_t n = r.u32();
  int64_t c = r.u32();
  GaussianSet g;
  r.set_context("avatar arrays");
  g.positions = r.f32_tensor({n, 3});
  g.rotations = r.f32_tensor({n, 4});
  g.scales = r.f32_tensor({n, 3});
  g.opacities = r.f32_tensor({n, 1});
  g.sh_coeffs = r.f32_tensor({n, c});
  std::optional<AvatarSkin> skin;
  r.set_context("avatar skin block");
  if (r.u8()) {
    AvatarSkin s;
    int64_t j = r.u32();
    s.joint_ids.resize(static_cast<size_t>(j));
    for (auto& id : s.joint_ids) id = r.u32();
    s.weights = r.f32_tensor({n, j});
    skin = std::move(s);
  }
  if (!r.eof()) throw Error(path + ": trailing bytes after avatar payload");
  g.validate();
  return {std::move(g), std::move(skin)};
}

}  // namespace splat
}  // namespace gav
