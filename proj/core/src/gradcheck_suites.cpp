#include <cmath>
#include <cstdio>
#include <functional>

#include "gav/gaussians.hpp"
#include "gav/gradcheck.hpp"
#include "gav/gradcheck_suites.hpp"
#include "gav/losses.hpp"
#include "gav/network.hpp"
#include "gav/ops.hpp"
#include "gav/renderer.hpp"
#include "gav/rng.hpp"
#include "gav/skinning.hpp"
#include "gav/tape.hpp"

namespace gav {
namespace suite {

namespace {

using Objective = std::function<Var(Tape&, const Var&)>;

Tensor rand_tensor(Shape s, Rng& rng, double lo, double hi) {
  Tensor t(std::move(s));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

/// Weighted sum with a fixed probe so every output coordinate matters with
/// a different cotangent.
Var probed_sum(const Var& y, const Tensor& probe) {
  return ops::sum_all(ops::mul(y, constant(probe)));
}

struct SuiteBuilder {
  SuiteReport report;
  Rng rng{2026};

  void check(const std::string& name, double threshold, const Objective& fn,
             const Tensor& x, double step) {
    GradCheckResult r = grad_check(fn, x, step);
    report.rows.push_back({name, r.max_rel_err, threshold});
  }
};

// ---- ops ---------------------------------------------------------------

void add_unary_checks(SuiteBuilder& b) {
  struct Case {
    const char* name;
    ops::UnaryOp op;
    double lo, hi;
  };
  // Domains keep inputs away from the kinks of abs/relu and inside the
  // domains of log/sqrt.
  const Case cases[] = {
      {"exp", ops::UnaryOp::Exp, -1.0, 1.0},
      {"log", ops::UnaryOp::Log, 0.5, 2.0},
      {"sigmoid", ops::UnaryOp::Sigmoid, -2.0, 2.0},
      {"softplus", ops::UnaryOp::Softplus, -2.0, 2.0},
      {"gelu", ops::UnaryOp::Gelu, -2.0, 2.0},
      {"negate", ops::UnaryOp::Negate, -1.0, 1.0},
      {"sqrt", ops::UnaryOp::Sqrt, 0.5, 2.0},
      {"tanh", ops::UnaryOp::Tanh, -2.0, 2.0},
      {"abs", ops::UnaryOp::Abs, 0.5, 2.0},
      {"relu", ops::UnaryOp::Relu, 0.5, 2.0},
  };
  for (const Case& c : cases) {
    Tensor x = rand_tensor({2, 3}, b.rng, c.lo, c.hi);
    Tensor probe = rand_tensor({2, 3}, b.rng, 0.2, 1.0);
    b.check(c.name, 1e-6,
            [&, op = c.op](Tape&, const Var& v) {
              return probed_sum(ops::apply_unary(op, v), probe);
            },
            x, 1e-6);
  }
}

void add_binary_checks(SuiteBuilder& b) {
  struct Case {
    const char* name;
    ops::BinaryOp op;
  };
  const Case cases[] = {{"add", ops::BinaryOp::Add},
                        {"sub", ops::BinaryOp::Sub},
                        {"mul", ops::BinaryOp::Mul},
                        {"div", ops::BinaryOp::Div}};
  for (const Case& c : cases) {
    Tensor a = rand_tensor({2, 3}, b.rng, 0.5, 1.5);
    Tensor other = rand_tensor({3}, b.rng, 0.5, 1.5);  // broadcast over rows
    Tensor probe = rand_tensor({2, 3}, b.rng, 0.2, 1.0);
    // Differentiate the broadcast side; its gradient is the reduction.
    b.check(c.name, 1e-6,
            [&, op = c.op](Tape&, const Var& v) {
              return probed_sum(ops::apply_binary(op, constant(a), v), probe);
            },
            other, 1e-6);
  }
}

SuiteReport suite_ops() {
  SuiteBuilder b;
  b.report.suite = "ops";
  add_unary_checks(b);
  add_binary_checks(b);

  {
    Tensor a = rand_tensor({3, 4}, b.rng, -1, 1);
    Tensor w = rand_tensor({4, 2}, b.rng, -1, 1);
    Tensor probe = rand_tensor({3, 2}, b.rng, 0.2, 1.0);
    b.check("matmul_lhs", 1e-6,
            [&](Tape&, const Var& v) {
              return probed_sum(ops::matmul(v, constant(w)), probe);
            },
            a, 1e-6);
    b.check("matmul_rhs", 1e-6,
            [&](Tape&, const Var& v) {
              return probed_sum(ops::matmul(constant(a), v), probe);
            },
            w, 1e-6);
  }
  {
    Tensor x = rand_tensor({2, 6}, b.rng, -1, 1);
    Tensor probe = rand_tensor({3, 2, 2}, b.rng, 0.2, 1.0);
    b.check("transpose_reshape_slice", 1e-6,
            [&](Tape&, const Var& v) {
              Var y = ops::reshape(ops::transpose(v), {3, 2, 2});
              return probed_sum(y, probe);
            },
            x, 1e-6);
  }
  {
    Tensor x = rand_tensor({4, 3}, b.rng, -1, 1);
    Tensor probe = rand_tensor({5, 3}, b.rng, 0.2, 1.0);
    b.check("concat_gather_slice", 1e-6,
            [&](Tape&, const Var& v) {
              Var top = ops::slice(v, 0, 0, 2);
              Var g = ops::gather_rows(v, {3, 1, 1});
              return probed_sum(ops::concat(0, {top, g}), probe);
            },
            x, 1e-6);
  }
  {
    Tensor x = rand_tensor({3, 4}, b.rng, -1, 1);
    Tensor probe = rand_tensor({3}, b.rng, 0.2, 1.0);
    b.check("reduce_sum", 1e-6,
            [&](Tape&, const Var& v) {
              return probed_sum(ops::reduce(ops::ReduceOp::Sum, v, 1), probe);
            },
            x, 1e-6);
    b.check("reduce_mean", 1e-6,
            [&](Tape&, const Var& v) {
              return probed_sum(ops::reduce(ops::ReduceOp::Mean, v, 1), probe);
            },
            x, 1e-6);
    // Max inputs are random doubles: ties have probability zero and the
    // perturbation is far smaller than the expected gaps.
    b.check("reduce_max", 1e-6,
            [&](Tape&, const Var& v) {
              return probed_sum(ops::reduce(ops::ReduceOp::Max, v, 1), probe);
            },
            x, 1e-7);
  }
  {
    Tensor x = rand_tensor({3, 5}, b.rng, -1, 1);
    Tensor probe = rand_tensor({3, 5}, b.rng, 0.2, 1.0);
    b.check("softmax", 1e-6,
            [&](Tape&, const Var& v) { return probed_sum(ops::softmax(v, 1), probe); },
            x, 1e-6);
  }
  {
    Tensor x = rand_tensor({3, 5}, b.rng, -1, 1);
    Tensor gain = rand_tensor({5}, b.rng, 0.5, 1.5);
    Tensor bias = rand_tensor({5}, b.rng, -0.5, 0.5);
    Tensor probe = rand_tensor({3, 5}, b.rng, 0.2, 1.0);
    b.check("layer_norm_x", 1e-6,
            [&](Tape&, const Var& v) {
              return probed_sum(ops::layer_norm(v, constant(gain), constant(bias)), probe);
            },
            x, 1e-6);
    b.check("layer_norm_gain", 1e-6,
            [&](Tape&, const Var& v) {
              return probed_sum(ops::layer_norm(constant(x), v, constant(bias)), probe);
            },
            gain, 1e-6);
  }
  {
    Tensor x = rand_tensor({3, 4}, b.rng, -1, 1);
    Tensor w = rand_tensor({4, 2}, b.rng, -1, 1);
    Tensor bias = rand_tensor({2}, b.rng, -1, 1);
    Tensor probe = rand_tensor({3, 2}, b.rng, 0.2, 1.0);
    b.check("linear", 1e-6,
            [&](Tape&, const Var& v) {
              return probed_sum(ops::linear(v, constant(w), constant(bias)), probe);
            },
            x, 1e-6);
  }
  {
    Tensor x = rand_tensor({3, 4}, b.rng, 0.5, 1.5);
    Tensor probe = rand_tensor({3, 4}, b.rng, 0.2, 1.0);
    b.check("normalize_rows", 1e-6,
            [&](Tape&, const Var& v) { return probed_sum(ops::normalize_rows(v), probe); },
            x, 1e-6);
  }
  {
    Tensor x = rand_tensor({4, 4, 3}, b.rng, -1, 1);
    Tensor k = rand_tensor({3, 3, 3, 2}, b.rng, -0.5, 0.5);
    Tensor probe = rand_tensor({4, 4, 2}, b.rng, 0.2, 1.0);
    b.check("conv2d", 1e-6,
            [&](Tape&, const Var& v) { return probed_sum(ops::conv2d_const(v, k), probe); },
            x, 1e-6);
  }
  {
    Tensor x = rand_tensor({4, 4, 2}, b.rng, -1, 1);
    Tensor probe = rand_tensor({2, 2, 2}, b.rng, 0.2, 1.0);
    b.check("avg_pool2", 1e-6,
            [&](Tape&, const Var& v) { return probed_sum(ops::avg_pool2(v), probe); },
            x, 1e-6);
  }
  {
    Tensor p = rand_tensor({3, 3}, b.rng, -1, 1);
    Tensor mats = rand_tensor({3, 3, 4}, b.rng, -1, 1);
    Tensor probe = rand_tensor({3, 3}, b.rng, 0.2, 1.0);
    b.check("affine_rows", 1e-6,
            [&](Tape&, const Var& v) { return probed_sum(ops::affine_rows(v, mats), probe); },
            p, 1e-6);
  }
  {
    Tensor q = rand_tensor({3, 4}, b.rng, -1, 1);
    Tensor r = rand_tensor({3, 4}, b.rng, -1, 1);
    Tensor probe = rand_tensor({3, 4}, b.rng, 0.2, 1.0);
    b.check("quat_mul_left", 1e-6,
            [&](Tape&, const Var& v) { return probed_sum(ops::quat_mul_left(q, v), probe); },
            r, 1e-6);
  }
  return b.report;
}

// ---- losses ------------------------------------------------------------

SuiteReport suite_losses() {
  SuiteBuilder b;
  b.report.suite = "losses";

  // Mean-absolute losses: keep |pred - target| bounded away from zero so the
  // kink of |.| never enters the finite-difference stencil.
  {
    Tensor target = rand_tensor({6, 6, 3}, b.rng, 0.0, 0.4);
    Tensor pred = target;
    for (int64_t i = 0; i < pred.size(); ++i) pred[i] += b.rng.uniform(0.1, 0.5);
    b.check("color_l1", 1e-6,
            [&](Tape&, const Var& v) { return loss::color_loss(v, constant(target)); },
            pred, 1e-6);
  }
  {
    Tensor target = rand_tensor({6, 6, 1}, b.rng, 0.0, 0.4);
    Tensor pred = target;
    for (int64_t i = 0; i < pred.size(); ++i) pred[i] += b.rng.uniform(0.1, 0.5);
    b.check("mask_l1", 1e-6,
            [&](Tape&, const Var& v) { return loss::mask_loss(v, constant(target)); },
            pred, 1e-6);
  }
  {
    // Composite pipeline (conv + tanh + pooling stack): the cross-channel
    // cancellation leaves tiny per-pixel gradients, so the tolerance is the
    // composed-pipeline one.
    loss::FeaturePyramid net = loss::FeaturePyramid::make(7);
    Tensor target = rand_tensor({8, 8, 3}, b.rng, 0.0, 1.0);
    Tensor pred = rand_tensor({8, 8, 3}, b.rng, 0.0, 1.0);
    b.check("perceptual", 1e-4,
            [&](Tape&, const Var& v) {
              return loss::perceptual_loss(v, constant(target), net);
            },
            pred, 1e-5);
  }
  {
    Tensor scales = rand_tensor({5, 3}, b.rng, 0.05, 0.2);
    b.check("isotropy", 1e-6,
            [&](Tape&, const Var& v) { return loss::isotropy_loss(v, 0.1); },
            scales, 1e-6);
  }
  {
    // Rows strictly outside the hinge so the objective is smooth there.
    Tensor offsets = rand_tensor({5, 3}, b.rng, 0.08, 0.2);
    b.check("offset_hinge", 1e-6,
            [&](Tape&, const Var& v) { return loss::offset_loss(v, 0.0525); },
            offsets, 1e-6);
  }
  return b.report;
}

// ---- renderer ----------------------------------------------------------

raster::Camera suite_camera(int64_t w, int64_t h) {
  raster::Camera cam;
  cam.fx = cam.fy = static_cast<double>(w);
  cam.cx = w / 2.0;
  cam.cy = h / 2.0;
  cam.width = w;
  cam.height = h;
  cam.near = 0.05;
  cam.world_to_camera = Mat4::identity();
  return cam;
}

splat::GaussianSet random_gaussians(int64_t n, Rng& rng, double max_opacity) {
  splat::GaussianSet g;
  g.positions = Tensor({n, 3});
  g.rotations = Tensor({n, 4});
  g.scales = Tensor({n, 3});
  g.opacities = Tensor({n, 1});
  g.sh_coeffs = Tensor({n, 12});
  for (int64_t i = 0; i < n; ++i) {
    g.positions.at2(i, 0) = rng.uniform(-0.5, 0.5);
    g.positions.at2(i, 1) = rng.uniform(-0.5, 0.5);
    g.positions.at2(i, 2) = rng.uniform(1.0, 3.0);
    double norm = 0;
    for (int k = 0; k < 4; ++k) {
      g.rotations.at2(i, k) = rng.normal();
      norm += g.rotations.at2(i, k) * g.rotations.at2(i, k);
    }
    for (int k = 0; k < 4; ++k) g.rotations.at2(i, k) /= std::sqrt(norm);
    for (int k = 0; k < 3; ++k) g.scales.at2(i, k) = rng.uniform(0.02, 0.15);
    g.opacities.at2(i, 0) = rng.uniform(0.1, max_opacity);
    for (int k = 0; k < 12; ++k) g.sh_coeffs.at2(i, k) = rng.normal() * 0.3;
  }
  return g;
}

SuiteReport suite_renderer() {
  SuiteBuilder b;
  b.report.suite = "renderer";
  raster::Camera cam = suite_camera(32, 32);
  // The rasterizer skips contributions with alpha below 1/255, so its forward
  // pass is discontinuous on a measure-zero contour set. Finite differences
  // are a valid oracle only away from it; this seed stays clear.
  Rng rng(301);
  splat::GaussianSet g = random_gaussians(8, rng, 0.7);
  Tensor probe_rgb = rand_tensor({32, 32, 3}, rng, 0.2, 1.0);
  Tensor probe_a = rand_tensor({32, 32, 1}, rng, 0.2, 1.0);

  auto objective = [&](int vary, const Var& x) {
    Var p = vary == 0 ? x : constant(g.positions);
    Var r = vary == 1 ? x : constant(g.rotations);
    Var sc = vary == 2 ? x : constant(g.scales);
    Var o = vary == 3 ? x : constant(g.opacities);
    Var f = vary == 4 ? x : constant(g.sh_coeffs);
    raster::RenderVars out = raster::render(p, r, sc, o, f, cam, {0.2, 0.2, 0.2});
    return ops::add(probed_sum(out.rgb, probe_rgb), probed_sum(out.alpha, probe_a));
  };
  b.check("positions", 1e-4,
          [&](Tape&, const Var& x) { return objective(0, x); }, g.positions, 1e-5);
  b.check("rotations", 1e-4,
          [&](Tape&, const Var& x) { return objective(1, x); }, g.rotations, 1e-6);
  b.check("scales", 1e-4,
          [&](Tape&, const Var& x) { return objective(2, x); }, g.scales, 1e-6);
  b.check("opacities", 1e-4,
          [&](Tape&, const Var& x) { return objective(3, x); }, g.opacities, 1e-6);
  // Pixel color is piecewise linear in the coefficients; the generous step
  // buries roundoff while staying exact for a linear map.
  b.check("sh_coeffs", 1e-4,
          [&](Tape&, const Var& x) { return objective(4, x); }, g.sh_coeffs, 1e-4);
  return b.report;
}

// ---- network -----------------------------------------------------------

body::SampledPoints suite_points(int64_t n_head, int64_t n_body, Rng& rng,
                                 double lo, double hi) {
  body::SampledPoints p;
  int64_t n = n_head + n_body;
  p.positions = Tensor({n, 3});
  for (int64_t i = 0; i < p.positions.size(); ++i) p.positions[i] = rng.uniform(lo, hi);
  p.face_index.assign(n, 0);
  p.barycentric = Tensor({n, 3});
  for (int64_t i = 0; i < n; ++i) p.barycentric.at2(i, 0) = 1.0;
  for (int64_t i = 0; i < n; ++i)
    p.region.push_back(i < n_head ? body::kHead : body::kBody);
  return p;
}

net::NetworkWeights micro_weights(const net::NetworkConfig& cfg, uint64_t seed) {
  net::NetworkWeights w = net::NetworkWeights::init(cfg, seed);
  // Activate the adaptive-norm modulation (zero at init) so attention and
  // gating paths actually carry gradient.
  Rng mr(seed + 1);
  for (auto& [key, t] : w.params)
    if (key.find("mod_") != std::string::npos)
      for (int64_t i = 0; i < t.size(); ++i) t[i] = mr.normal() * 0.2;
  return w;
}

SuiteReport suite_network() {
  SuiteBuilder b;
  b.report.suite = "network";
  net::NetworkConfig cfg = net::NetworkConfig::micro();
  net::NetworkWeights w = micro_weights(cfg, 18);
  Rng rng(20);
  body::SampledPoints p = suite_points(4, 8, rng, -0.8, 0.8);
  Tensor body_img = rand_tensor({cfg.body_res, cfg.body_res, 3}, rng, 0, 1);
  Tensor crop = rand_tensor({cfg.head_res, cfg.head_res, 3}, rng, 0, 1);

  auto objective_for = [&](const std::string& key) {
    return [&, key](Tape&, const Var& x) {
      net::VarMap vm;
      for (const auto& [k, t] : w.params) vm.vars.emplace(k, k == key ? x : constant(t));
      net::RawVars rv = net::predict_gaussians(constant(body_img), constant(crop), p,
                                               cfg, vm, net::ForwardMode::infer());
      Var s = ops::add(ops::sum_all(rv.offset_raw), ops::sum_all(rv.rotation_raw));
      s = ops::add(s, ops::sum_all(rv.scale_raw));
      s = ops::add(s, ops::sum_all(rv.opacity_raw));
      return ops::add(s, ops::sum_all(rv.sh_raw));
    };
  };
  // One representative tensor per architectural component. Stage-1/stage-3
  // context-stream feed-forwards are excluded: with one fusion layer their
  // outputs are never consumed, so they carry no gradient by construction.
  const char* keys[] = {
      "geo.mlp1.w",            "body_enc.patch.b",      "body_enc.pos",
      "body_enc.blk0.attn.wq", "body_enc.blk3.ff.b1",   "body_enc.out_ln.g",
      "head_enc.fuse.b",       "head_enc.blk2.attn.wo", "head_enc.proj1.b",
      "ctx.mlp1.b",            "block0.stage1.mod_q.b", "block0.stage1.attn.wv",
      "block0.stage1.ff_q.b1", "block0.norm_head.g",    "block0.stage3.mod_c.b",
      "block0.stage3.ff_q.b2", "regress.trunk1.b",      "regress.rotation.b",
  };
  for (const char* key : keys) b.check(key, 1e-4, objective_for(key), w.at(key), 1e-4);
  return b.report;
}

// ---- end-to-end --------------------------------------------------------

SuiteReport suite_end2end() {
  SuiteBuilder b;
  b.report.suite = "end2end";
  net::NetworkConfig cfg = net::NetworkConfig::micro();
  net::NetworkWeights w = micro_weights(cfg, 31);
  // Fat, translucent Gaussians keep every pixel far from the rasterizer's
  // alpha-skip and transmittance-exit thresholds, so the whole pipeline is
  // smooth at this configuration and finite differences are a valid oracle.
  w.at("regress.scale.b") = Tensor({3}, {-0.3, -0.3, -0.3});
  w.at("regress.opacity.b") = Tensor({1}, {0.0});

  Rng rng(32);
  body::SampledPoints p = suite_points(3, 5, rng, -0.25, 0.25);
  for (int64_t i = 0; i < p.positions.extent(0); ++i)
    p.positions.at2(i, 2) += 2.0;  // in front of the camera
  Tensor body_img = rand_tensor({cfg.body_res, cfg.body_res, 3}, rng, 0, 1);
  Tensor crop = rand_tensor({cfg.head_res, cfg.head_res, 3}, rng, 0, 1);

  raster::Camera cam = suite_camera(24, 24);
  Tensor target_rgb = rand_tensor({24, 24, 3}, rng, 0, 1);
  Tensor target_mask = rand_tensor({24, 24, 1}, rng, 0, 1);

  // Two-joint rig with small distinct rotations.
  std::vector<Mat4> transforms;
  for (int j = 0; j < 2; ++j) {
    Mat3 r = axis_angle_to_mat3({0.05 * (j + 1), -0.03 * (j + 1), 0.02});
    transforms.push_back(Mat4::from_rt(r, {0.01 * (j + 1), -0.01, 0.005}));
  }
  Tensor skin({8, 2});
  for (int64_t i = 0; i < 8; ++i) {
    double a = rng.uniform(0.2, 0.8);
    skin.at2(i, 0) = a;
    skin.at2(i, 1) = 1.0 - a;
  }
  loss::FeaturePyramid percep = loss::FeaturePyramid::make(1234);
  loss::LossWeights lw;
  lw.scale_target = 0.5;

  auto objective_for = [&](const std::string& key) {
    return [&, key](Tape&, const Var& x) {
      net::VarMap vm;
      for (const auto& [k, t] : w.params) vm.vars.emplace(k, k == key ? x : constant(t));
      net::RawVars raw = net::predict_gaussians(constant(body_img), constant(crop), p,
                                                cfg, vm, net::ForwardMode::infer());
      splat::GaussianVars g = splat::activate_raw(raw.offset_raw, raw.rotation_raw,
                                                  raw.scale_raw, raw.opacity_raw,
                                                  raw.sh_raw, p.positions, {});
      Var offsets = ops::sub(g.positions, constant(p.positions));
      skin::PosedVars posed =
          skin::pose_gaussians(g.positions, g.rotations, skin, transforms);
      raster::RenderVars out = raster::render(posed.positions, posed.rotations,
                                              g.scales, g.opacities, g.sh_coeffs,
                                              cam, {0, 0, 0});
      loss::LossVars lv;
      lv.color = loss::color_loss(out.rgb, constant(target_rgb));
      lv.mask = loss::mask_loss(out.alpha, constant(target_mask));
      lv.perceptual = loss::perceptual_loss(out.rgb, constant(target_rgb), percep);
      lv.isotropy = loss::isotropy_loss(g.scales, lw.scale_target);
      lv.offset = loss::offset_loss(offsets, lw.offset_limit);
      return loss::assemble_total(lv.color, lv.mask, lv.perceptual, lv.isotropy,
                                  lv.offset, lw);
    };
  };
  const char* keys[] = {
      "geo.mlp2.b",           "body_enc.proj.b",     "head_enc.proj2.b",
      "ctx.mlp2.b",           "block0.stage1.mod_q.b", "block0.stage3.attn.bo",
      "regress.trunk2.b",     "regress.offset.b",    "regress.scale.b",
      "regress.sh.b",
  };
  for (const char* key : keys) b.check(key, 1e-4, objective_for(key), w.at(key), 1e-4);
  return b.report;
}

}  // namespace

bool SuiteReport::all_pass() const {
  for (const CheckRow& r : rows)
    if (!r.pass()) return false;
  return !rows.empty();
}

double SuiteReport::worst() const {
  double m = 0;
  for (const CheckRow& r : rows) m = std::max(m, r.max_rel_err);
  return m;
}

std::string SuiteReport::to_text() const {
  std::string out;
  char line[160];
  for (const CheckRow& r : rows) {
    std::snprintf(line, sizeof(line), "%-24s max_rel_err %.3e threshold %.0e %s\n",
                  r.name.c_str(), r.max_rel_err, r.threshold,
                  r.pass() ? "ok" : "FAIL");
    out += line;
  }
  std::snprintf(line, sizeof(line), "suite %s: %s (worst %.3e)\n", suite.c_str(),
                all_pass() ? "pass" : "FAIL", worst());
  out += line;
  return out;
}

std::vector<std::string> suite_names() {
  return {"ops", "losses", "renderer", "network", "end2end"};
}

SuiteReport run_suite(const std::string& name) {
  if (name == "ops") return suite_ops();
  if (name == "losses") return suite_losses();
  if (name == "renderer") return suite_renderer();
  if (name == "network") return suite_network();
  if (name == "end2end") return suite_end2end();
  throw Error("unknown gradient-check suite: " + name);
}

}  // namespace suite
}  // namespace gav
