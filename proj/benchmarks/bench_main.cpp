// Microbenchmarks for the hot paths: the tile rasterizer (forward and
// backward), dense matmul, and one full optimization step.

#include <benchmark/benchmark.h>

#include "gav/body_model.hpp"
#include "gav/ops.hpp"
#include "gav/renderer.hpp"
#include "gav/rng.hpp"
#include "gav/training.hpp"

using namespace gav;

namespace {

splat::GaussianSet bench_gaussians(int64_t n, uint64_t seed) {
  Rng rng(seed);
  splat::GaussianSet g;
  g.positions = Tensor({n, 3});
  g.rotations = Tensor({n, 4});
  g.scales = Tensor({n, 3});
  g.opacities = Tensor({n, 1});
  g.sh_coeffs = Tensor({n, 12});
  for (int64_t i = 0; i < n; ++i) {
    g.positions.at2(i, 0) = rng.uniform(-0.5, 0.5);
    g.positions.at2(i, 1) = rng.uniform(-0.5, 0.5);
    g.positions.at2(i, 2) = rng.uniform(1.5, 3.0);
    double norm = 0;
    for (int k = 0; k < 4; ++k) {
      g.rotations.at2(i, k) = rng.normal();
      norm += g.rotations.at2(i, k) * g.rotations.at2(i, k);
    }
    for (int k = 0; k < 4; ++k) g.rotations.at2(i, k) /= std::sqrt(norm);
    for (int k = 0; k < 3; ++k) g.scales.at2(i, k) = rng.uniform(0.02, 0.1);
    g.opacities.at2(i, 0) = rng.uniform(0.2, 0.8);
    for (int k = 0; k < 12; ++k) g.sh_coeffs.at2(i, k) = rng.normal() * 0.3;
  }
  return g;
}

raster::Camera bench_camera(int64_t res) {
  raster::Camera cam;
  cam.fx = cam.fy = static_cast<double>(res);
  cam.cx = cam.cy = res / 2.0;
  cam.width = cam.height = res;
  cam.near = 0.05;
  cam.world_to_camera = Mat4::identity();
  return cam;
}

void BM_RenderForward(benchmark::State& state) {
  splat::GaussianSet g = bench_gaussians(state.range(0), 1);
  raster::Camera cam = bench_camera(128);
  for (auto _ : state) {
    raster::RenderResult r = raster::render(g, cam, {0, 0, 0});
    benchmark::DoNotOptimize(r.rgb.data());
  }
}
BENCHMARK(BM_RenderForward)->Arg(128)->Arg(512)->Arg(2048);

void BM_RenderBackward(benchmark::State& state) {
  splat::GaussianSet g = bench_gaussians(state.range(0), 2);
  raster::Camera cam = bench_camera(128);
  for (auto _ : state) {
    Tape tape;
    Var p = tape.leaf(g.positions);
    Var r = tape.leaf(g.rotations);
    Var sc = tape.leaf(g.scales);
    Var o = tape.leaf(g.opacities);
    Var f = tape.leaf(g.sh_coeffs);
    raster::RenderVars out = raster::render(p, r, sc, o, f, cam, {0, 0, 0});
    tape.backward(ops::add(ops::sum_all(out.rgb), ops::sum_all(out.alpha)));
    benchmark::DoNotOptimize(tape.grad(p).data());
  }
}
BENCHMARK(BM_RenderBackward)->Arg(128)->Arg(512);

void BM_Matmul(benchmark::State& state) {
  int64_t n = state.range(0);
  Rng rng(3);
  Tensor a({n, n}), b({n, n});
  for (int64_t i = 0; i < a.size(); ++i) a[i] = rng.normal();
  for (int64_t i = 0; i < b.size(); ++i) b[i] = rng.normal();
  for (auto _ : state) {
    Var c = ops::matmul(constant(a), constant(b));
    benchmark::DoNotOptimize(c.value().data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

void BM_TrainStep(benchmark::State& state) {
  train::SceneParams p;
  p.n_gaussians = 120;
  p.n_train_views = 3;
  p.n_holdout_views = 1;
  p.image_res = 64;
  p.skin_resolution = 16;
  train::SyntheticScene scene =
      train::make_synthetic_scene(body::generate_humanoid(), p, 9);
  train::TrainConfig cfg;
  cfg.net = net::NetworkConfig::micro();
  cfg.net.body_res = 64;
  cfg.net.head_res = 16;
  cfg.targets_per_step = 2;
  train::Trainer trainer(cfg, scene);
  for (auto _ : state) {
    loss::LossReport r = trainer.train_step();
    benchmark::DoNotOptimize(r.total);
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
