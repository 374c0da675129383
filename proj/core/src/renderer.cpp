#include "gav/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

namespace gav {
namespace raster {

namespace {

constexpr double kCovFloor = 0.3;        // px^2 low-pass
constexpr double kAlphaClip = 0.99;
constexpr double kAlphaSkip = 1.0 / 255.0;
constexpr double kExitT = 1e-4;
constexpr int64_t kTile = 16;
constexpr double kSh0 = 0.28209479177387814;
constexpr double kSh1 = 0.4886025119029199;
// footprint radius in standard deviations: alpha can only clear the 1/255
// skip threshold within sqrt(2 ln 255) sigma, so this bound is exact
const double kFootprintSigmas = std::sqrt(2.0 * std::log(255.0));

struct PreparedSplat {
  Splat2D s;
  int64_t index;      // row in the input set
  double conic[3];    // inverse 2D covariance (a,b,c)
  double radius;      // conservative pixel footprint
  double t[3];        // camera-space mean
  double v[9];        // camera-space 3x3 covariance
  double dir[3];      // unit view direction, world space
  double dist;        // distance to the camera center
  bool clamped[3];    // color channels pinned by the [0,1] clamp
};

bool project_one(const double* p, const double* quat, const double* scale, double opacity,
                 const double* sh, int64_t sh_dim, const Camera& cam, PreparedSplat* out) {
  Mat3 w = cam.world_to_camera.rotation();
  Vec3 tr = cam.world_to_camera.translation_part();
  Vec3 t = w * Vec3{p[0], p[1], p[2]} + tr;
  if (t.z <= cam.near) return false;

  double mx = cam.fx * t.x / t.z + cam.cx;
  double my = cam.fy * t.y / t.z + cam.cy;

  Quat q{quat[0], quat[1], quat[2], quat[3]};
  Mat3 rq = quat_to_mat3(q);
  Mat3 rd;  // R diag(s^2)
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) rd.at(i, j) = rq.at(i, j) * scale[j] * scale[j];
  Mat3 sigma = rd * rq.transposed();
  Mat3 v = w * sigma * w.transposed();

  double j00 = cam.fx / t.z, j02 = -cam.fx * t.x / (t.z * t.z);
  double j11 = cam.fy / t.z, j12 = -cam.fy * t.y / (t.z * t.z);
  double jm[2][3] = {{j00, 0, j02}, {0, j11, j12}};
  double cov[2][2] = {{kCovFloor, 0}, {0, kCovFloor}};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) cov[a][b] += jm[a][k] * v.at(k, l) * jm[b][l];

  double ca = cov[0][0], cb = cov[0][1], cc = cov[1][1];
  double det = ca * cc - cb * cb;
  double mid = 0.5 * (ca + cc);
  double disc = std::sqrt(std::max(0.0, mid * mid - det));
  double radius = kFootprintSigmas * std::sqrt(mid + disc);
  if (mx + radius < 0 || mx - radius > static_cast<double>(cam.width - 1) ||
      my + radius < 0 || my - radius > static_cast<double>(cam.height - 1))
    return false;

  Vec3 c0 = cam.center();
  Vec3 d{p[0] - c0.x, p[1] - c0.y, p[2] - c0.z};
  double dist = d.norm();
  d = d * (1.0 / dist);

  out->index = 0;
  out->s.mean_x = mx;
  out->s.mean_y = my;
  out->s.cov_a = ca;
  out->s.cov_b = cb;
  out->s.cov_c = cc;
  out->s.depth = t.z;
  out->s.opacity = opacity;
  out->conic[0] = cc / det;
  out->conic[1] = -cb / det;
  out->conic[2] = ca / det;
  out->radius = radius;
  out->t[0] = t.x;
  out->t[1] = t.y;
  out->t[2] = t.z;
  for (int i = 0; i < 9; ++i) out->v[i] = v.m[i];
  out->dir[0] = d.x;
  out->dir[1] = d.y;
  out->dir[2] = d.z;
  out->dist = dist;
  for (int ch = 0; ch < 3; ++ch) {
    double c = 0.5 + kSh0 * sh[ch];
    if (sh_dim == 12)
      c += kSh1 * (-d.y * sh[3 + ch] + d.z * sh[6 + ch] - d.x * sh[9 + ch]);
    out->clamped[ch] = c < 0.0 || c > 1.0;
    out->s.rgb[ch] = std::clamp(c, 0.0, 1.0);
  }
  return true;
}

std::vector<PreparedSplat> prepare(const Tensor& pos, const Tensor& rot, const Tensor& sc,
                                   const Tensor& op, const Tensor& sh, const Camera& cam) {
  cam.validate();
  pos.check_finite("render positions");
  rot.check_finite("render rotations");
  sc.check_finite("render scales");
  op.check_finite("render opacities");
  sh.check_finite("render sh coefficients");
  int64_t n = pos.shape().empty() ? 0 : pos.shape()[0];
  int64_t c = sh.shape().size() < 2 ? 3 : sh.shape()[1];
  std::vector<PreparedSplat> splats;
  splats.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    PreparedSplat sp;
    if (project_one(pos.data() + i * 3, rot.data() + i * 4, sc.data() + i * 3, op[i],
                    sh.data() + i * c, c, cam, &sp)) {
      sp.index = i;
      splats.push_back(sp);
    }
  }
  std::stable_sort(splats.begin(), splats.end(),
                   [](const PreparedSplat& a, const PreparedSplat& b) {
                     if (a.s.depth != b.s.depth) return a.s.depth < b.s.depth;
                     return a.index < b.index;
                   });
  return splats;
}

inline bool splat_alpha(const PreparedSplat& sp, double px, double py, double* alpha,
                        double* gauss) {
  double dx = px - sp.s.mean_x, dy = py - sp.s.mean_y;
  double q = sp.conic[0] * dx * dx + 2 * sp.conic[1] * dx * dy + sp.conic[2] * dy * dy;
  double e = std::exp(-0.5 * q);
  double a = sp.s.opacity * e;
  if (a > kAlphaClip) a = kAlphaClip;
  if (a < kAlphaSkip) return false;
  *alpha = a;
  if (gauss) *gauss = e;
  return true;
}

struct TileLists {
  int64_t tiles_x = 0, tiles_y = 0;
  std::vector<std::vector<int64_t>> splats;  // per tile, indices into prepared order
};

TileLists build_tiles(const std::vector<PreparedSplat>& splats, const Camera& cam) {
  TileLists tl;
  tl.tiles_x = (cam.width + kTile - 1) / kTile;
  tl.tiles_y = (cam.height + kTile - 1) / kTile;
  tl.splats.resize(static_cast<size_t>(tl.tiles_x * tl.tiles_y));
  for (int64_t m = 0; m < static_cast<int64_t>(splats.size()); ++m) {
    const PreparedSplat& sp = splats[static_cast<size_t>(m)];
    int64_t x0 = std::max<int64_t>(
        0, static_cast<int64_t>(std::floor((sp.s.mean_x - sp.radius) / kTile)));
    int64_t x1 = std::min(tl.tiles_x - 1, static_cast<int64_t>(std::floor(
                                              (sp.s.mean_x + sp.radius) / kTile)));
    int64_t y0 = std::max<int64_t>(
        0, static_cast<int64_t>(std::floor((sp.s.mean_y - sp.radius) / kTile)));
    int64_t y1 = std::min(tl.tiles_y - 1, static_cast<int64_t>(std::floor(
                                              (sp.s.mean_y + sp.radius) / kTile)));
    for (int64_t ty = y0; ty <= y1; ++ty)
      for (int64_t tx = x0; tx <= x1; ++tx)
        tl.splats[static_cast<size_t>(ty * tl.tiles_x + tx)].push_back(m);
  }
  return tl;
}

RenderResult composite(const std::vector<PreparedSplat>& splats, const Camera& cam,
                       const std::array<double, 3>& bg, bool tiled) {
  RenderResult out;
  out.rgb = Tensor({cam.height, cam.width, 3});
  out.alpha = Tensor({cam.height, cam.width, 1});

  if (!tiled) {
#pragma omp parallel for schedule(static)
    for (int64_t py = 0; py < cam.height; ++py) {
      for (int64_t px = 0; px < cam.width; ++px) {
        double trans = 1.0, acc[3] = {0, 0, 0};
        for (const PreparedSplat& sp : splats) {
          double a;
          if (!splat_alpha(sp, static_cast<double>(px), static_cast<double>(py), &a,
                           nullptr))
            continue;
          for (int ch = 0; ch < 3; ++ch) acc[ch] += sp.s.rgb[ch] * a * trans;
          trans *= 1.0 - a;
        }
        for (int ch = 0; ch < 3; ++ch)
          out.rgb[(py * cam.width + px) * 3 + ch] = acc[ch] + bg[static_cast<size_t>(ch)] * trans;
        out.alpha[py * cam.width + px] = 1.0 - trans;
      }
    }
    return out;
  }

  TileLists tl = build_tiles(splats, cam);
  int64_t num_tiles = tl.tiles_x * tl.tiles_y;
#pragma omp parallel for schedule(dynamic)
  for (int64_t tile = 0; tile < num_tiles; ++tile) {
    const std::vector<int64_t>& list = tl.splats[static_cast<size_t>(tile)];
    int64_t px0 = (tile % tl.tiles_x) * kTile, py0 = (tile / tl.tiles_x) * kTile;
    int64_t px1 = std::min(px0 + kTile, cam.width), py1 = std::min(py0 + kTile, cam.height);
    for (int64_t py = py0; py < py1; ++py) {
      for (int64_t px = px0; px < px1; ++px) {
        double trans = 1.0, acc[3] = {0, 0, 0};
        for (int64_t m : list) {
          const PreparedSplat& sp = splats[static_cast<size_t>(m)];
          double a;
          if (!splat_alpha(sp, static_cast<double>(px), static_cast<double>(py), &a,
                           nullptr))
            continue;
          for (int ch = 0; ch < 3; ++ch) acc[ch] += sp.s.rgb[ch] * a * trans;
          trans *= 1.0 - a;
          if (trans < kExitT) break;
        }
        for (int ch = 0; ch < 3; ++ch)
          out.rgb[(py * cam.width + px) * 3 + ch] = acc[ch] + bg[static_cast<size_t>(ch)] * trans;
        out.alpha[py * cam.width + px] = 1.0 - trans;
      }
    }
  }
  return out;
}

}  // namespace

Vec3 Camera::center() const {
  Mat3 r = world_to_camera.rotation();
  Vec3 tr = world_to_camera.translation_part();
  return r.transposed() * (tr * -1.0);
}

void Camera::validate() const {
  if (fx <= 0 || fy <= 0) throw Error("camera: focal lengths must be positive");
  if (width < 1 || height < 1) throw Error("camera: empty image");
  if (near <= 0) throw Error("camera: near plane must be positive");
  Mat3 r = world_to_camera.rotation();
  Mat3 rtr = r.transposed() * r;
  Mat3 id = Mat3::identity();
  for (int i = 0; i < 9; ++i)
    if (std::abs(rtr.m[i] - id.m[i]) > 1e-6)
      throw Error("camera: extrinsic rotation is not orthonormal");
}

std::optional<Splat2D> project_gaussian(const splat::GaussianSet& g, int64_t i,
                                        const Camera& cam) {
  cam.validate();
  if (i < 0 || i >= g.count()) throw Error("project_gaussian: index out of range");
  PreparedSplat sp;
  if (!project_one(g.positions.data() + i * 3, g.rotations.data() + i * 4,
                   g.scales.data() + i * 3, g.opacities[i], g.sh_coeffs.data() + i * g.sh_dim(),
                   g.sh_dim(), cam, &sp))
    return std::nullopt;
  return sp.s;
}

RenderResult brute_force_render(const splat::GaussianSet& g, const Camera& cam,
                                const std::array<double, 3>& background) {
  auto splats = prepare(g.positions, g.rotations, g.scales, g.opacities, g.sh_coeffs, cam);
  return composite(splats, cam, background, /*tiled=*/false);
}

RenderResult render(const splat::GaussianSet& g, const Camera& cam,
                    const std::array<double, 3>& background) {
  auto splats = prepare(g.positions, g.rotations, g.scales, g.opacities, g.sh_coeffs, cam);
  return composite(splats, cam, background, /*tiled=*/true);
}

namespace {

// dR/dq_k for the (unnormalized) quaternion-to-matrix formula
void quat_rotation_derivs(const double* q, double d[4][9]) {
  double w = q[0], x = q[1], y = q[2], z = q[3];
  double dw[9] = {0, -z, y, z, 0, -x, -y, x, 0};
  double dx[9] = {0, y, z, y, -2 * x, -w, z, w, -2 * x};
  double dy[9] = {-2 * y, x, w, x, 0, z, -w, z, -2 * y};
  double dz[9] = {-2 * z, -w, x, w, -2 * z, y, x, y, 0};
  for (int i = 0; i < 9; ++i) {
    d[0][i] = 2 * dw[i];
    d[1][i] = 2 * dx[i];
    d[2][i] = 2 * dy[i];
    d[3][i] = 2 * dz[i];
  }
}

struct SplatGrads {
  // accumulated per prepared splat over all pixels:
  // mean (2), conic quadratic-form coefficients (3), color (3), opacity (1)
  double g[9];
};

}  // namespace

RenderVars render(const Var& positions, const Var& rotations, const Var& scales,
                  const Var& opacities, const Var& sh_coeffs, const Camera& cam,
                  const std::array<double, 3>& background) {
  auto splats = std::make_shared<std::vector<PreparedSplat>>(prepare(
      positions.value(), rotations.value(), scales.value(), opacities.value(),
      sh_coeffs.value(), cam));
  RenderResult fwd = composite(*splats, cam, background, /*tiled=*/true);

  Tape* tp = common_tape({&positions, &rotations, &scales, &opacities, &sh_coeffs});
  RenderVars out;
  if (!tp) {
    out.rgb = constant(std::move(fwd.rgb));
    out.alpha = constant(std::move(fwd.alpha));
    return out;
  }
  int64_t rgb_id = tp->fresh(fwd.rgb.shape());
  int64_t alpha_id = tp->fresh(fwd.alpha.shape());
  out.rgb = tp->wrap(std::move(fwd.rgb), rgb_id);
  out.alpha = tp->wrap(std::move(fwd.alpha), alpha_id);

  int64_t pid = positions.id, rid = rotations.id, sid = scales.id, oid = opacities.id,
          fid = sh_coeffs.id;
  auto pos = positions.val;
  auto rot = rotations.val;
  auto sc = scales.val;
  auto sh = sh_coeffs.val;
  std::array<double, 3> bg = background;

  tp->record([=](Tape& t) {
    const Tensor* grgb = t.grad_in(rgb_id);
    const Tensor* galpha = t.grad_in(alpha_id);
    if (!grgb && !galpha) return;

    int64_t m_count = static_cast<int64_t>(splats->size());
    std::vector<SplatGrads> acc(static_cast<size_t>(m_count), SplatGrads{});
    TileLists tl = build_tiles(*splats, cam);
    int64_t num_tiles = tl.tiles_x * tl.tiles_y;
    std::vector<std::vector<SplatGrads>> tile_acc(static_cast<size_t>(num_tiles));

#pragma omp parallel for schedule(dynamic)
    for (int64_t tile = 0; tile < num_tiles; ++tile) {
      const std::vector<int64_t>& list = tl.splats[static_cast<size_t>(tile)];
      if (list.empty()) continue;
      std::vector<SplatGrads>& local = tile_acc[static_cast<size_t>(tile)];
      local.assign(list.size(), SplatGrads{});
      int64_t px0 = (tile % tl.tiles_x) * kTile, py0 = (tile / tl.tiles_x) * kTile;
      int64_t px1 = std::min(px0 + kTile, cam.width);
      int64_t py1 = std::min(py0 + kTile, cam.height);
      struct Hit {
        int64_t li;
        double alpha, trans, gauss;
      };
      std::vector<Hit> hits;
      for (int64_t py = py0; py < py1; ++py) {
        for (int64_t px = px0; px < px1; ++px) {
          hits.clear();
          double trans = 1.0;
          for (int64_t li = 0; li < static_cast<int64_t>(list.size()); ++li) {
            const PreparedSplat& sp = (*splats)[static_cast<size_t>(list[static_cast<size_t>(li)])];
            double a, e;
            if (!splat_alpha(sp, static_cast<double>(px), static_cast<double>(py), &a, &e))
              continue;
            hits.push_back({li, a, trans, e});
            trans *= 1.0 - a;
            if (trans < kExitT) break;
          }
          double t_end = trans;
          double gr[3] = {0, 0, 0};
          if (grgb)
            for (int ch = 0; ch < 3; ++ch)
              gr[ch] = (*grgb)[(py * cam.width + px) * 3 + ch];
          double ga = galpha ? (*galpha)[py * cam.width + px] : 0.0;
          double suffix[3];
          for (int ch = 0; ch < 3; ++ch) suffix[ch] = bg[static_cast<size_t>(ch)] * t_end;

          for (int64_t h = static_cast<int64_t>(hits.size()) - 1; h >= 0; --h) {
            const Hit& hit = hits[static_cast<size_t>(h)];
            const PreparedSplat& sp =
                (*splats)[static_cast<size_t>(list[static_cast<size_t>(hit.li)])];
            SplatGrads& sg = local[static_cast<size_t>(hit.li)];
            double one_minus = 1.0 - hit.alpha;
            double g_alpha = ga * t_end / one_minus;
            for (int ch = 0; ch < 3; ++ch) {
              sg.g[5 + ch] += gr[ch] * hit.alpha * hit.trans;  // color
              g_alpha += gr[ch] * (sp.s.rgb[ch] * hit.trans - suffix[ch] / one_minus);
              suffix[ch] += sp.s.rgb[ch] * hit.alpha * hit.trans;
            }
            if (sp.s.opacity * hit.gauss <= kAlphaClip) {  // clip kills the gradient
              sg.g[8] += g_alpha * hit.gauss;              // opacity
              double gq = -0.5 * hit.alpha * g_alpha;
              double dx = static_cast<double>(px) - sp.s.mean_x;
              double dy = static_cast<double>(py) - sp.s.mean_y;
              sg.g[0] += gq * (-2.0 * (sp.conic[0] * dx + sp.conic[1] * dy));  // mean x
              sg.g[1] += gq * (-2.0 * (sp.conic[1] * dx + sp.conic[2] * dy));  // mean y
              sg.g[2] += gq * dx * dx;       // conic a
              sg.g[3] += gq * 2.0 * dx * dy; // conic b
              sg.g[4] += gq * dy * dy;       // conic c
            }
          }
        }
      }
    }
    // deterministic reduction: tiles in index order
    for (int64_t tile = 0; tile < num_tiles; ++tile) {
      const std::vector<int64_t>& list = tl.splats[static_cast<size_t>(tile)];
      const std::vector<SplatGrads>& local = tile_acc[static_cast<size_t>(tile)];
      for (size_t li = 0; li < local.size(); ++li)
        for (int k = 0; k < 9; ++k) acc[static_cast<size_t>(list[li])].g[k] += local[li].g[k];
    }

    int64_t n = pos->shape()[0];
    int64_t c = sh->shape()[1];
    Tensor gp({n, 3}), gq4({n, 4}), gs({n, 3}), go({n, 1}), gf({n, c});
    Mat3 w = cam.world_to_camera.rotation();

    for (int64_t m = 0; m < m_count; ++m) {
      const PreparedSplat& sp = (*splats)[static_cast<size_t>(m)];
      const double* g = acc[static_cast<size_t>(m)].g;
      int64_t i = sp.index;

      go[i] += g[8];

      // color -> sh coefficients and view direction
      double gdir[3] = {0, 0, 0};
      for (int ch = 0; ch < 3; ++ch) {
        if (sp.clamped[ch]) continue;
        double gc = g[5 + ch];
        gf[i * c + ch] += gc * kSh0;
        if (c == 12) {
          gf[i * c + 3 + ch] += gc * kSh1 * (-sp.dir[1]);
          gf[i * c + 6 + ch] += gc * kSh1 * sp.dir[2];
          gf[i * c + 9 + ch] += gc * kSh1 * (-sp.dir[0]);
          const double* f = sh->data() + i * c;
          gdir[0] += gc * kSh1 * (-f[9 + ch]);
          gdir[1] += gc * kSh1 * (-f[3 + ch]);
          gdir[2] += gc * kSh1 * f[6 + ch];
        }
      }

      // conic -> 2D covariance (full-matrix inverse rule)
      double ka = sp.conic[0], kb = sp.conic[1], kc = sp.conic[2];
      double gk[2][2] = {{g[2], g[3] * 0.5}, {g[3] * 0.5, g[4]}};
      double kmat[2][2] = {{ka, kb}, {kb, kc}};
      double tmp[2][2], gcov[2][2];
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          tmp[a][b] = gk[a][0] * kmat[0][b] + gk[a][1] * kmat[1][b];
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          gcov[a][b] = -(kmat[a][0] * tmp[0][b] + kmat[a][1] * tmp[1][b]);

      // 2D covariance -> Jacobian and camera-space covariance
      double tz = sp.t[2];
      double j00 = cam.fx / tz, j02 = -cam.fx * sp.t[0] / (tz * tz);
      double j11 = cam.fy / tz, j12 = -cam.fy * sp.t[1] / (tz * tz);
      double jm[2][3] = {{j00, 0, j02}, {0, j11, j12}};
      double jv[2][3];  // J * V
      for (int a = 0; a < 2; ++a)
        for (int k = 0; k < 3; ++k) {
          jv[a][k] = 0;
          for (int l = 0; l < 3; ++l) jv[a][k] += jm[a][l] * sp.v[l * 3 + k];
        }
      double gj[2][3];  // 2 * gcov * (J V)
      for (int a = 0; a < 2; ++a)
        for (int k = 0; k < 3; ++k)
          gj[a][k] = 2.0 * (gcov[a][0] * jv[0][k] + gcov[a][1] * jv[1][k]);
      Mat3 gv{};  // J^T gcov J
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) {
          double s = 0;
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) s += jm[a][k] * gcov[a][b] * jm[b][l];
          gv.at(k, l) = s;
        }

      // camera-space covariance -> world covariance -> rotation and scales
      Mat3 gsigma = w.transposed() * gv * w;
      Quat q{rot->at2(i, 0), rot->at2(i, 1), rot->at2(i, 2), rot->at2(i, 3)};
      Mat3 rq = quat_to_mat3(q);
      Mat3 rtgr = rq.transposed() * gsigma * rq;
      for (int k = 0; k < 3; ++k)
        gs[i * 3 + k] += 2.0 * sc->at2(i, k) * rtgr.at(k, k);
      Mat3 rqd;  // 2 gsigma R D
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          double s = 0;
          for (int k = 0; k < 3; ++k) s += gsigma.at(a, k) * rq.at(k, b);
          rqd.at(a, b) = 2.0 * s * sc->at2(i, b) * sc->at2(i, b);
        }
      double qd[4][9];
      double qraw[4] = {q[0], q[1], q[2], q[3]};
      quat_rotation_derivs(qraw, qd);
      for (int k = 0; k < 4; ++k) {
        double s = 0;
        for (int e = 0; e < 9; ++e) s += rqd.m[static_cast<size_t>(e)] * qd[k][e];
        gq4[i * 4 + k] += s;
      }

      // mean and Jacobian -> camera-space point -> world position
      double gt[3] = {0, 0, 0};
      gt[0] += g[0] * cam.fx / tz;
      gt[1] += g[1] * cam.fy / tz;
      gt[2] += -g[0] * cam.fx * sp.t[0] / (tz * tz) - g[1] * cam.fy * sp.t[1] / (tz * tz);
      gt[2] += gj[0][0] * (-cam.fx / (tz * tz));
      gt[2] += gj[1][1] * (-cam.fy / (tz * tz));
      gt[0] += gj[0][2] * (-cam.fx / (tz * tz));
      gt[2] += gj[0][2] * (2.0 * cam.fx * sp.t[0] / (tz * tz * tz));
      gt[1] += gj[1][2] * (-cam.fy / (tz * tz));
      gt[2] += gj[1][2] * (2.0 * cam.fy * sp.t[1] / (tz * tz * tz));
      Vec3 gpw = w.transposed() * Vec3{gt[0], gt[1], gt[2]};
      gp[i * 3 + 0] += gpw.x;
      gp[i * 3 + 1] += gpw.y;
      gp[i * 3 + 2] += gpw.z;

      // view-direction path of the color
      if (gdir[0] != 0 || gdir[1] != 0 || gdir[2] != 0) {
        double dd = sp.dir[0] * gdir[0] + sp.dir[1] * gdir[1] + sp.dir[2] * gdir[2];
        for (int k = 0; k < 3; ++k)
          gp[i * 3 + k] += (gdir[k] - sp.dir[k] * dd) / sp.dist;
      }
    }

    if (pid >= 0) t.accum(pid, gp);
    if (rid >= 0) t.accum(rid, gq4);
    if (sid >= 0) t.accum(sid, gs);
    if (oid >= 0) t.accum(oid, go);
    if (fid >= 0) t.accum(fid, gf);
  });
  return out;
}

}  // namespace raster
}  // namespace gav
