#include <algorithm>
#include <cmath>
#include <filesystem>

#include "gav/binio.hpp"
#include "gav/image.hpp"
#include "gav/rng.hpp"
#include "gav/skinning.hpp"
#include "gav/training.hpp"

namespace gav {
namespace train {

namespace {

constexpr double kSh0 = 0.28209479177387814;
constexpr double kSh1 = 0.4886025119029199;

/// Every array that passes through a float32 file format is quantized up
/// front, so the in-memory scene and its serialized form agree exactly.
void quantize_f32(Tensor& t) {
  for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(t[i]);
}

Vec3 mesh_center(const body::BodyTemplate& t) {
  Vec3 c;
  int64_t v = t.num_vertices();
  for (int64_t i = 0; i < v; ++i) {
    c.x += t.vertices.at2(i, 0);
    c.y += t.vertices.at2(i, 1);
    c.z += t.vertices.at2(i, 2);
  }
  return c * (1.0 / static_cast<double>(v));
}

raster::Camera look_at(const Vec3& eye, const Vec3& target, int64_t res,
                       double focal) {
  Vec3 z = (target - eye).normalized();
  Vec3 up{0, 1, 0};
  Vec3 x = up.cross(z).normalized();
  Vec3 y = z.cross(x);
  raster::Camera cam;
  cam.fx = cam.fy = focal;
  cam.cx = cam.cy = res / 2.0;
  cam.width = cam.height = res;
  cam.near = 0.1;
  Mat4& w = cam.world_to_camera;
  w = Mat4::identity();
  const Vec3 rows[3] = {x, y, z};
  for (int r = 0; r < 3; ++r) {
    w.m[r * 4 + 0] = rows[r].x;
    w.m[r * 4 + 1] = rows[r].y;
    w.m[r * 4 + 2] = rows[r].z;
    w.m[r * 4 + 3] = -rows[r].dot(eye);
  }
  cam.validate();
  return cam;
}

double mean_nearest_neighbor(const Tensor& p) {
  int64_t n = p.extent(0);
  double acc = 0;
  for (int64_t i = 0; i < n; ++i) {
    double best = 1e300;
    for (int64_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double d = 0;
      for (int64_t k = 0; k < 3; ++k) {
        double e = p.at2(i, k) - p.at2(j, k);
        d += e * e;
      }
      best = std::min(best, d);
    }
    acc += std::sqrt(best);
  }
  return acc / static_cast<double>(n);
}

void head_crop_rect(const Tensor& posed_positions,
                    const std::vector<uint8_t>& region,
                    const raster::Camera& cam, double rect[4]) {
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  int64_t n = posed_positions.extent(0);
  const Mat4& w = cam.world_to_camera;
  for (int64_t i = 0; i < n; ++i) {
    if (region[i] != body::kHead) continue;
    double p[3] = {posed_positions.at2(i, 0), posed_positions.at2(i, 1),
                   posed_positions.at2(i, 2)};
    double t[3];
    for (int r = 0; r < 3; ++r)
      t[r] = w.m[r * 4 + 0] * p[0] + w.m[r * 4 + 1] * p[1] +
             w.m[r * 4 + 2] * p[2] + w.m[r * 4 + 3];
    if (t[2] <= cam.near) continue;
    double u = cam.fx * t[0] / t[2] + cam.cx;
    double v = cam.fy * t[1] / t[2] + cam.cy;
    x0 = std::min(x0, u);
    x1 = std::max(x1, u);
    y0 = std::min(y0, v);
    y1 = std::max(y1, v);
  }
  if (x0 > x1) throw Error("head crop: no visible head anchors in view");
  // Expand by 20% and square up on the longer side.
  double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
  double half = 0.5 * 1.2 * std::max(x1 - x0, y1 - y0);
  half = std::max(half, 1.0);
  rect[0] = cx - half;
  rect[1] = cy - half;
  rect[2] = cx + half;
  rect[3] = cy + half;
}

}  // namespace

std::vector<int64_t> SyntheticScene::train_views() const {
  std::vector<int64_t> out;
  for (int64_t i = 0; i < static_cast<int64_t>(views.size()); ++i)
    if (std::find(holdout.begin(), holdout.end(), i) == holdout.end())
      out.push_back(i);
  return out;
}

Tensor crop_resize(const Tensor& img, const double rect[4], int64_t out_res) {
  img::validate_image(img, "crop_resize");
  int64_t h = img.extent(0), w = img.extent(1), c = img.extent(2);
  Tensor out({out_res, out_res, c});
  double sx = (rect[2] - rect[0]) / static_cast<double>(out_res);
  double sy = (rect[3] - rect[1]) / static_cast<double>(out_res);
  for (int64_t i = 0; i < out_res; ++i) {
    for (int64_t j = 0; j < out_res; ++j) {
      double x = rect[0] + (j + 0.5) * sx - 0.5;
      double y = rect[1] + (i + 0.5) * sy - 0.5;
      double fx = std::clamp(x, 0.0, static_cast<double>(w - 1));
      double fy = std::clamp(y, 0.0, static_cast<double>(h - 1));
      int64_t jx = std::min(static_cast<int64_t>(fx), w - 2 >= 0 ? w - 2 : 0);
      int64_t iy = std::min(static_cast<int64_t>(fy), h - 2 >= 0 ? h - 2 : 0);
      double ax = fx - jx, ay = fy - iy;
      for (int64_t ch = 0; ch < c; ++ch) {
        auto px = [&](int64_t yy, int64_t xx) {
          return img[(yy * w + xx) * c + ch];
        };
        int64_t jx1 = std::min(jx + 1, w - 1), iy1 = std::min(iy + 1, h - 1);
        out[(i * out_res + j) * c + ch] =
            (1 - ay) * ((1 - ax) * px(iy, jx) + ax * px(iy, jx1)) +
            ay * ((1 - ax) * px(iy1, jx) + ax * px(iy1, jx1));
      }
    }
  }
  return out;
}

SyntheticScene make_synthetic_scene(const body::BodyTemplate& t,
                                    const SceneParams& p, uint64_t seed) {
  if (p.n_gaussians < 2 || p.n_train_views < 1 || p.n_holdout_views < 0 ||
      p.image_res < 16)
    throw Error("make_synthetic_scene: invalid parameters");
  SyntheticScene s;
  s.seed = seed;
  s.body = t;
  Rng rng(seed);

  s.points = body::sample_surface_points(t, p.n_gaussians, rng.next_u64());
  quantize_f32(s.points.positions);
  quantize_f32(s.points.barycentric);
  s.anchor_spacing = mean_nearest_neighbor(s.points.positions);

  int64_t n = p.n_gaussians;
  splat::GaussianSet g;
  g.positions = Tensor({n, 3});
  g.rotations = Tensor({n, 4});
  g.scales = Tensor({n, 3});
  g.opacities = Tensor({n, 1});
  g.sh_coeffs = Tensor({n, 12});
  const double max_offset = 0.8 * 0.0525;  // strictly inside the hinge
  for (int64_t i = 0; i < n; ++i) {
    Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
    dir = dir.normalized();
    double r = rng.uniform(0.0, max_offset);
    g.positions.at2(i, 0) = s.points.positions.at2(i, 0) + r * dir.x;
    g.positions.at2(i, 1) = s.points.positions.at2(i, 1) + r * dir.y;
    g.positions.at2(i, 2) = s.points.positions.at2(i, 2) + r * dir.z;
    double qn = 0;
    for (int k = 0; k < 4; ++k) {
      g.rotations.at2(i, k) = rng.normal();
      qn += g.rotations.at2(i, k) * g.rotations.at2(i, k);
    }
    for (int k = 0; k < 4; ++k) g.rotations.at2(i, k) /= std::sqrt(qn);
    for (int k = 0; k < 3; ++k)
      g.scales.at2(i, k) = s.anchor_spacing * rng.uniform(0.9, 1.1);
    g.opacities.at2(i, 0) = rng.uniform(0.7, 0.95);
    for (int k = 0; k < 3; ++k)
      g.sh_coeffs.at2(i, k) = (rng.uniform(0.15, 0.85) - 0.5) / kSh0;
    for (int k = 3; k < 12; ++k)
      g.sh_coeffs.at2(i, k) = rng.uniform(-0.1, 0.1) / kSh1;
  }
  quantize_f32(g.positions);
  quantize_f32(g.rotations);
  quantize_f32(g.scales);
  quantize_f32(g.opacities);
  quantize_f32(g.sh_coeffs);
  // Re-quantized quaternions stay unit within float precision; validate()
  // tolerates that.
  g.validate();
  s.gt = g;

  skin::SkinField field =
      skin::build_skin_field(t, p.skin_resolution, 30, 0.1);
  s.skin_weights = skin::query_weights(field, s.points.positions);
  // Quantized like everything else that passes through the f32 avatar file;
  // rows then sum to 1 only to float precision, which blending tolerates
  // (the rest pose still maps through exact identities).
  quantize_f32(s.skin_weights);

  Vec3 center = mesh_center(t);
  int64_t n_total = p.n_train_views + p.n_holdout_views;
  // Holdout views are spread evenly around the circle.
  if (p.n_holdout_views > 0) {
    int64_t stride = n_total / p.n_holdout_views;
    for (int64_t k = 0; k < p.n_holdout_views; ++k)
      s.holdout.push_back(std::min(k * stride + stride - 1, n_total - 1));
  }
  for (int64_t k = 0; k < n_total; ++k) {
    SceneView view;
    double az = 2.0 * 3.14159265358979323846 * k / n_total;
    Vec3 eye = center + Vec3{std::sin(az), 0, std::cos(az)} * p.camera_distance;
    view.camera = look_at(eye, center, p.image_res, 1.2 * p.image_res);
    view.pose = body::Pose::rest(t.num_joints());
    if (k != 0) {  // view 0 shows the canonical (rest) pose
      for (int64_t i = 0; i < view.pose.axis_angle.size(); ++i)
        view.pose.axis_angle[i] = rng.uniform(-p.max_pose_angle, p.max_pose_angle);
      view.pose.root_translation =
          Vec3{rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03),
               rng.uniform(-0.03, 0.03)};
    }
    std::vector<Mat4> transforms = body::forward_kinematics(t, view.pose);
    splat::GaussianSet posed =
        skin::pose_gaussians(s.gt, s.skin_weights, transforms);
    raster::RenderResult rr = raster::render(posed, view.camera, {0, 0, 0});
    view.rgb = std::move(rr.rgb);
    view.alpha = std::move(rr.alpha);
    quantize_f32(view.rgb);
    quantize_f32(view.alpha);
    head_crop_rect(posed.positions, s.points.region, view.camera,
                   view.head_rect);
    s.views.push_back(std::move(view));
  }
  s.source_view = 0;
  return s;
}

void write_scene(const SyntheticScene& s, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create scene directory: " + dir);
  body::save_body_model(s.body, dir + "/body.lbm");
  splat::AvatarSkin skin;
  int64_t j = s.skin_weights.extent(1);
  for (int64_t i = 0; i < j; ++i)
    skin.joint_ids.push_back(static_cast<uint32_t>(i));
  skin.weights = s.skin_weights;
  splat::write_avatar(s.gt, skin, dir + "/gt.lha");

  BinWriter w;
  w.tag("LHS1");
  w.u32(1);
  w.u64(s.seed);
  w.u64(static_cast<uint64_t>(s.source_view));
  w.f64(s.anchor_spacing);
  w.u32(static_cast<uint32_t>(s.holdout.size()));
  for (int64_t h : s.holdout) w.u64(static_cast<uint64_t>(h));
  int64_t n = s.points.count();
  w.u64(static_cast<uint64_t>(n));
  w.f64_array(s.points.positions);
  for (int64_t i = 0; i < n; ++i) w.u64(static_cast<uint64_t>(s.points.face_index[i]));
  w.f64_array(s.points.barycentric);
  for (int64_t i = 0; i < n; ++i) w.u8(s.points.region[i]);
  w.u32(static_cast<uint32_t>(s.views.size()));
  for (const SceneView& v : s.views) {
    w.f64(v.camera.fx);
    w.f64(v.camera.fy);
    w.f64(v.camera.cx);
    w.f64(v.camera.cy);
    w.f64(v.camera.near);
    w.u64(static_cast<uint64_t>(v.camera.width));
    w.u64(static_cast<uint64_t>(v.camera.height));
    for (double m : v.camera.world_to_camera.m) w.f64(m);
    w.u64(static_cast<uint64_t>(v.pose.axis_angle.extent(0)));
    w.f64_array(v.pose.axis_angle);
    w.f64(v.pose.root_translation.x);
    w.f64(v.pose.root_translation.y);
    w.f64(v.pose.root_translation.z);
    for (int k = 0; k < 4; ++k) w.f64(v.head_rect[k]);
  }
  w.save(dir + "/scene.meta");

  char name[64];
  for (size_t k = 0; k < s.views.size(); ++k) {
    std::snprintf(name, sizeof(name), "/view%03zu.rgb.limg", k);
    img::write_raw(s.views[k].rgb, dir + name);
    std::snprintf(name, sizeof(name), "/view%03zu.a.limg", k);
    img::write_raw(s.views[k].alpha, dir + name);
  }
}

SyntheticScene read_scene(const std::string& dir) {
  SyntheticScene s;
  s.body = body::load_body_model(dir + "/body.lbm");
  auto [gt, skin] = splat::read_avatar(dir + "/gt.lha");
  s.gt = std::move(gt);
  if (!skin) throw Error(dir + ": ground-truth avatar is missing skin weights");
  s.skin_weights = skin->weights;

  BinReader r = BinReader::from_file(dir + "/scene.meta");
  r.set_context("scene header");
  if (r.tag() != "LHS1") throw Error(dir + "/scene.meta: bad magic");
  uint32_t ver = r.u32();
  if (ver != 1)
    throw Error(dir + "/scene.meta: unsupported version " + std::to_string(ver));
  s.seed = r.u64();
  s.source_view = static_cast<int64_t>(r.u64());
  s.anchor_spacing = r.f64();
  uint32_t nh = r.u32();
  for (uint32_t i = 0; i < nh; ++i) s.holdout.push_back(static_cast<int64_t>(r.u64()));
  r.set_context("scene anchors");
  int64_t n = static_cast<int64_t>(r.u64());
  s.points.positions = r.f64_tensor({n, 3});
  for (int64_t i = 0; i < n; ++i)
    s.points.face_index.push_back(static_cast<int64_t>(r.u64()));
  s.points.barycentric = r.f64_tensor({n, 3});
  for (int64_t i = 0; i < n; ++i) s.points.region.push_back(r.u8());
  r.set_context("scene views");
  uint32_t nv = r.u32();
  for (uint32_t k = 0; k < nv; ++k) {
    SceneView v;
    v.camera.fx = r.f64();
    v.camera.fy = r.f64();
    v.camera.cx = r.f64();
    v.camera.cy = r.f64();
    v.camera.near = r.f64();
    v.camera.width = static_cast<int64_t>(r.u64());
    v.camera.height = static_cast<int64_t>(r.u64());
    for (double& m : v.camera.world_to_camera.m) m = r.f64();
    v.camera.validate();
    int64_t j = static_cast<int64_t>(r.u64());
    v.pose.axis_angle = r.f64_tensor({j, 3});
    v.pose.root_translation.x = r.f64();
    v.pose.root_translation.y = r.f64();
    v.pose.root_translation.z = r.f64();
    for (int i = 0; i < 4; ++i) v.head_rect[i] = r.f64();
    char name[64];
    std::snprintf(name, sizeof(name), "/view%03u.rgb.limg", k);
    v.rgb = img::read_raw(dir + name);
    std::snprintf(name, sizeof(name), "/view%03u.a.limg", k);
    v.alpha = img::read_raw(dir + name);
    s.views.push_back(std::move(v));
  }
  if (!r.eof()) throw Error(dir + "/scene.meta: trailing bytes");
  if (s.source_view < 0 || s.source_view >= static_cast<int64_t>(s.views.size()))
    throw Error(dir + "/scene.meta: source view out of range");
  return s;
}

}  // namespace train
}  // namespace gav
