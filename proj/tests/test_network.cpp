#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <set>

#include "gav/gradcheck.hpp"
#include "gav/network.hpp"
#include "gav/ops.hpp"
#include "gav/rng.hpp"

using namespace gav;
using namespace gav::net;

namespace {

Tensor random_image(int64_t res, Rng& rng) {
  Tensor t({res, res, 3});
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform();
  return t;
}

body::SampledPoints test_points(int64_t n_head, int64_t n_body, Rng& rng) {
  body::SampledPoints p;
  int64_t n = n_head + n_body;
  p.positions = Tensor({n, 3});
  for (int64_t i = 0; i < p.positions.size(); ++i)
    p.positions[i] = rng.uniform(-0.8, 0.8);
  p.face_index.assign(n, 0);
  p.barycentric = Tensor({n, 3});
  for (int64_t i = 0; i < n; ++i) p.barycentric.at2(i, 0) = 1.0;
  // Interleave the regions so order restoration is actually exercised.
  for (int64_t i = 0; i < n; ++i)
    p.region.push_back(i % 3 == 0 && i / 3 < n_head ? body::kHead : body::kBody);
  int64_t heads = 0;
  for (auto r : p.region) heads += r == body::kHead;
  // Top up if the interleave pattern fell short.
  for (int64_t i = n - 1; heads < n_head; --i)
    if (p.region[i] == body::kBody) {
      p.region[i] = body::kHead;
      ++heads;
    }
  return p;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (int64_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("positional encoding basics") {
  SUBCASE("origin encodes as alternating 0/1") {
    Tensor p({1, 3});
    Tensor e = positional_encoding(p, 5);
    CHECK(e.shape() == Shape{1, 30});
    for (int64_t j = 0; j < 30; j += 2) {
      CHECK(e[j] == 0.0);      // sin terms
      CHECK(e[j + 1] == 1.0);  // cos terms
    }
  }
  SUBCASE("injective on a grid inside the principal period") {
    int64_t side = 7;
    Tensor pts({side * side * side, 3});
    int64_t r = 0;
    for (int64_t a = 0; a < side; ++a)
      for (int64_t b = 0; b < side; ++b)
        for (int64_t cc = 0; cc < side; ++cc) {
          pts.at2(r, 0) = -0.9 + 1.8 * a / (side - 1);
          pts.at2(r, 1) = -0.9 + 1.8 * b / (side - 1);
          pts.at2(r, 2) = -0.9 + 1.8 * cc / (side - 1);
          ++r;
        }
    Tensor e = positional_encoding(pts, 4);
    int64_t n = pts.extent(0), c = e.extent(1);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = i + 1; j < n; ++j) {
        double diff = 0;
        for (int64_t k = 0; k < c; ++k)
          diff = std::max(diff, std::abs(e.at2(i, k) - e.at2(j, k)));
        if (diff == 0.0) {
          CAPTURE(i);
          CAPTURE(j);
          REQUIRE(diff > 0.0);
        }
      }
    CHECK(true);
  }
}

TEST_CASE("geometric tokens preserve count and order") {
  NetworkConfig cfg = NetworkConfig::micro();
  NetworkWeights w = NetworkWeights::init(cfg, 1);
  Rng rng(2);
  body::SampledPoints p = test_points(4, 8, rng);
  Tape tape;
  VarMap vm = as_constants(w);
  Var tok = encode_geometric(p.positions, cfg, vm);
  CHECK(tok.shape() == Shape{12, cfg.token_dim});

  // Reversing the input point order reverses the token rows.
  Tensor rev({12, 3});
  for (int64_t i = 0; i < 12; ++i)
    for (int64_t k = 0; k < 3; ++k) rev.at2(i, k) = p.positions.at2(11 - i, k);
  Var tok2 = encode_geometric(rev, cfg, vm);
  for (int64_t i = 0; i < 12; ++i)
    for (int64_t k = 0; k < cfg.token_dim; ++k)
      CHECK(tok.value().at2(i, k) == tok2.value().at2(11 - i, k));
}

TEST_CASE("body image encoder: token count, determinism, sensitivity") {
  NetworkConfig cfg;  // defaults: 128x128, patch 16
  CHECK(cfg.body_tokens() == 64);
  NetworkWeights w = NetworkWeights::init(cfg, 3);
  Rng rng(4);
  Tensor img = random_image(cfg.body_res, rng);
  VarMap vm = as_constants(w);
  Tape t1;
  Tensor tok_a = encode_body_image(constant(img), cfg, vm).value();
  CHECK(tok_a.shape() == Shape{64, cfg.token_dim});
  Tape t2;
  Tensor tok_b = encode_body_image(constant(img), cfg, vm).value();
  CHECK(bitwise_equal(tok_a, tok_b));

  // Swap the R and B channels: the tokens must move.
  Tensor swapped = img;
  for (int64_t i = 0; i < img.size(); i += 3)
    std::swap(swapped[i], swapped[i + 2]);
  Tensor tok_c = encode_body_image(constant(swapped), cfg, vm).value();
  double diff = 0;
  for (int64_t i = 0; i < tok_a.size(); ++i)
    diff = std::max(diff, std::abs(tok_a[i] - tok_c[i]));
  CHECK(diff > 0.0);

  Tensor bad({64, 64, 3});
  CHECK_THROWS_AS(encode_body_image(constant(bad), cfg, vm), Error);
}

TEST_CASE("head pyramid: shape and tap gradient flow") {
  NetworkConfig cfg = NetworkConfig::micro();  // depth 4, taps (1,2,3,4)
  NetworkWeights w = NetworkWeights::init(cfg, 5);
  Rng rng(6);
  Tensor crop = random_image(cfg.head_res, rng);

  {
    VarMap vm = as_constants(w);
    Tape tape;
    Var tok = encode_head_pyramid(constant(crop), cfg, vm);
    CHECK(tok.shape() == Shape{cfg.head_tokens(), cfg.token_dim});
  }

  // Zero the fusion rows of all taps but the shallowest: gradients must
  // stop flowing into the deepest encoder block.
  int64_t c = cfg.token_dim;
  Tensor& fuse = w.at("head_enc.fuse.w");
  for (int64_t i = c; i < 4 * c; ++i)
    for (int64_t j = 0; j < c; ++j) fuse.at2(i, j) = 0.0;
  Tape tape;
  VarMap vm = as_leaves(tape, w);
  Var tok = encode_head_pyramid(constant(crop), cfg, vm);
  tape.backward(ops::sum_all(tok));
  Tensor g_deep = tape.grad(vm.at("head_enc.blk3.attn.wq"));
  for (int64_t i = 0; i < g_deep.size(); ++i) CHECK(g_deep[i] == 0.0);
  Tensor g_shallow = tape.grad(vm.at("head_enc.blk0.attn.wq"));
  double mag = 0;
  for (int64_t i = 0; i < g_shallow.size(); ++i)
    mag = std::max(mag, std::abs(g_shallow[i]));
  CHECK(mag > 0.0);
}

TEST_CASE("global context: singleton, duplication, argmax gradient routing") {
  NetworkConfig cfg = NetworkConfig::micro();
  NetworkWeights w = NetworkWeights::init(cfg, 7);
  Rng rng(8);
  int64_t c = cfg.token_dim;
  Tensor one({1, c}), many({5, c});
  for (int64_t i = 0; i < one.size(); ++i) one[i] = rng.normal();
  for (int64_t i = 0; i < many.size(); ++i) many[i] = rng.normal();

  VarMap vm = as_constants(w);
  Tape tape;
  Tensor f1 = global_context(constant(one), cfg, vm).value();
  CHECK(f1.shape() == Shape{1, c});

  // Duplicating every token cannot change an elementwise max.
  Tensor dup({10, c});
  for (int64_t i = 0; i < 5; ++i)
    for (int64_t k = 0; k < c; ++k) {
      dup.at2(i, k) = many.at2(i, k);
      dup.at2(i + 5, k) = many.at2(i, k);
    }
  Tensor fa = global_context(constant(many), cfg, vm).value();
  Tensor fb = global_context(constant(dup), cfg, vm).value();
  CHECK(bitwise_equal(fa, fb));

  // Gradient reaches exactly the per-channel argmax token.
  Tape t2;
  Var tokens = t2.leaf(many);
  t2.backward(ops::sum_all(global_context(tokens, cfg, vm)));
  Tensor g = t2.grad(tokens);
  for (int64_t k = 0; k < c; ++k) {
    int64_t arg = 0;
    for (int64_t i = 1; i < 5; ++i)
      if (many.at2(i, k) > many.at2(arg, k)) arg = i;
    for (int64_t i = 0; i < 5; ++i)
      if (i != arg) CHECK(g.at2(i, k) == 0.0);
  }

  Tensor empty({0, c});
  CHECK_THROWS_AS(global_context(constant(empty), cfg, vm), Error);
}

TEST_CASE("fusion sub-block: identity at init, context permutation equivariance") {
  NetworkConfig cfg = NetworkConfig::micro();
  Rng rng(9);
  int64_t c = cfg.token_dim;
  Tensor q({5, c}), ctx({7, c}), fg({1, c});
  for (int64_t i = 0; i < q.size(); ++i) q[i] = rng.normal();
  for (int64_t i = 0; i < ctx.size(); ++i) ctx[i] = rng.normal();
  for (int64_t i = 0; i < fg.size(); ++i) fg[i] = rng.normal();

  SUBCASE("zero-initialized modulation makes the block a bitwise identity") {
    NetworkWeights w = NetworkWeights::init(cfg, 10);
    VarMap vm = as_constants(w);
    Tape tape;
    StreamPair out = mm_transformer_block(constant(q), constant(ctx),
                                          constant(fg), cfg, vm,
                                          "block0.stage1.");
    CHECK(bitwise_equal(out.query.value(), q));
    CHECK(bitwise_equal(out.context.value(), ctx));
  }

  SUBCASE("permuting context tokens permutes outputs, query unchanged") {
    NetworkWeights w = NetworkWeights::init(cfg, 10);
    // Activate the modulation so the block actually mixes.
    Rng mr(11);
    for (auto& [key, t] : w.params)
      if (key.find("mod_") != std::string::npos)
        for (int64_t i = 0; i < t.size(); ++i) t[i] = mr.normal() * 0.3;
    VarMap vm = as_constants(w);
    Tape tape;
    StreamPair base = mm_transformer_block(constant(q), constant(ctx),
                                           constant(fg), cfg, vm,
                                           "block0.stage1.");
    int64_t perm[7] = {3, 0, 6, 1, 5, 2, 4};
    Tensor ctx_p({7, c});
    for (int64_t i = 0; i < 7; ++i)
      for (int64_t k = 0; k < c; ++k) ctx_p.at2(i, k) = ctx.at2(perm[i], k);
    StreamPair moved = mm_transformer_block(constant(ctx_p.shape() == q.shape() ? q : q),
                                            constant(ctx_p), constant(fg), cfg,
                                            vm, "block0.stage1.");
    double dq = 0, dc = 0;
    for (int64_t i = 0; i < q.size(); ++i)
      dq = std::max(dq,
                    std::abs(base.query.value()[i] - moved.query.value()[i]));
    for (int64_t i = 0; i < 7; ++i)
      for (int64_t k = 0; k < c; ++k)
        dc = std::max(dc, std::abs(base.context.value().at2(perm[i], k) -
                                   moved.context.value().at2(i, k)));
    CHECK(dq < 1e-12);
    CHECK(dc < 1e-12);
  }
}

TEST_CASE("head-token shrink: counts, determinism, ratio-0 no-op") {
  NetworkConfig cfg;
  SUBCASE("floor arithmetic and bounds") {
    CHECK(shrink_keep_indices(100, 0.5, 1, 0.5).size() == 50);
    CHECK(shrink_keep_indices(10, 0.25, 1, 0.5).size() == 8);
    CHECK_THROWS_AS(shrink_keep_indices(10, 0.6, 1, 0.5), Error);
  }
  SUBCASE("same seed same set; seeds rarely collide") {
    auto a = shrink_keep_indices(100, 0.5, 42, 0.5);
    auto b = shrink_keep_indices(100, 0.5, 42, 0.5);
    CHECK(a == b);
    std::set<std::vector<int64_t>> seen;
    for (uint64_t s = 0; s < 100; ++s)
      seen.insert(shrink_keep_indices(100, 0.5, s, 0.5));
    CHECK(seen.size() >= 99);  // collisions overwhelmingly unlikely
  }
  SUBCASE("ratio 0 is a bitwise no-op across 100 seeds") {
    Rng rng(12);
    Tensor tok({16, 8});
    for (int64_t i = 0; i < tok.size(); ++i) tok[i] = rng.normal();
    for (uint64_t s = 0; s < 100; ++s) {
      Tape tape;
      Var v = constant(tok);
      Var out = shrink_head_tokens(v, 0.0, s, cfg);
      CHECK(out.val.get() == v.val.get());  // same buffer, no copy
    }
  }
  SUBCASE("survivors keep relative order") {
    auto keep = shrink_keep_indices(50, 0.5, 7, 0.5);
    for (size_t i = 1; i < keep.size(); ++i) CHECK(keep[i] > keep[i - 1]);
  }
}

TEST_CASE("full fusion block conserves token counts across 100 seeds") {
  NetworkConfig cfg = NetworkConfig::micro();
  NetworkWeights w = NetworkWeights::init(cfg, 13);
  VarMap vm = as_constants(w);
  int64_t c = cfg.token_dim;
  Rng rng(14);
  for (int seed = 0; seed < 100; ++seed) {
    int64_t nh = 1 + static_cast<int64_t>(rng.uniform_int(6));
    int64_t nb = 1 + static_cast<int64_t>(rng.uniform_int(10));
    int64_t nih = 1 + static_cast<int64_t>(rng.uniform_int(8));
    int64_t nib = 1 + static_cast<int64_t>(rng.uniform_int(8));
    auto mk = [&](int64_t n) {
      Tensor t({n, c});
      for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
      return constant(t);
    };
    Tape tape;
    GeoStreams s{mk(nh), mk(nb), mk(nih), mk(nib)};
    Tensor fg({1, c});
    for (int64_t i = 0; i < c; ++i) fg[i] = rng.normal();
    GeoStreams out = fusion_block(s, constant(fg), cfg, vm, "block0.");
    CHECK(out.geo_head.shape() == Shape{nh, c});
    CHECK(out.geo_body.shape() == Shape{nb, c});
    CHECK(out.img_head.shape() == Shape{nih, c});
    CHECK(out.img_body.shape() == Shape{nib, c});
  }
}

TEST_CASE("single-pass prediction: shapes, determinism, init independence") {
  NetworkConfig cfg = NetworkConfig::micro();
  NetworkWeights w = NetworkWeights::init(cfg, 15);
  Rng rng(16);
  body::SampledPoints p = test_points(4, 8, rng);
  Tensor body_img = random_image(cfg.body_res, rng);
  Tensor crop = random_image(cfg.head_res, rng);

  auto forward = [&](const Tensor& img, const Tensor& hc, ForwardMode mode) {
    Tape tape;
    VarMap vm = as_constants(w);
    RawVars rv = predict_gaussians(constant(img), constant(hc), p, cfg, vm, mode);
    splat::RawGaussianParams out;
    out.offset_raw = rv.offset_raw.value();
    out.rotation_raw = rv.rotation_raw.value();
    out.scale_raw = rv.scale_raw.value();
    out.opacity_raw = rv.opacity_raw.value();
    out.sh_raw = rv.sh_raw.value();
    return out;
  };

  auto a = forward(body_img, crop, ForwardMode::infer());
  CHECK(a.offset_raw.shape() == Shape{12, 3});
  CHECK(a.rotation_raw.shape() == Shape{12, 4});
  CHECK(a.scale_raw.shape() == Shape{12, 3});
  CHECK(a.opacity_raw.shape() == Shape{12, 1});
  CHECK(a.sh_raw.shape() == Shape{12, cfg.sh_dim});

  auto b = forward(body_img, crop, ForwardMode::infer());
  CHECK(bitwise_equal(a.offset_raw, b.offset_raw));
  CHECK(bitwise_equal(a.sh_raw, b.sh_raw));

  // Train mode at ratio 0 must match inference bitwise.
  auto t0 = forward(body_img, crop, ForwardMode::training(0.0, 99));
  CHECK(bitwise_equal(a.offset_raw, t0.offset_raw));
  CHECK(bitwise_equal(a.rotation_raw, t0.rotation_raw));
  CHECK(bitwise_equal(a.opacity_raw, t0.opacity_raw));

  // At initialization every modulation gate is zero, so the prediction
  // cannot depend on either image.
  Rng rng2(17);
  auto c2 = forward(random_image(cfg.body_res, rng2),
                    random_image(cfg.head_res, rng2), ForwardMode::infer());
  CHECK(bitwise_equal(a.offset_raw, c2.offset_raw));
  CHECK(bitwise_equal(a.scale_raw, c2.scale_raw));
  CHECK(bitwise_equal(a.sh_raw, c2.sh_raw));

  // Rotation rows start near the identity quaternion (regression bias).
  for (int64_t i = 0; i < 12; ++i)
    CHECK(a.rotation_raw.at2(i, 0) > 0.25);
}

TEST_CASE("end-to-end gradients match finite differences on the micro config") {
  NetworkConfig cfg = NetworkConfig::micro();
  NetworkWeights w = NetworkWeights::init(cfg, 18);
  // Activate the modulation so attention and gating paths carry gradient.
  Rng mr(19);
  for (auto& [key, t] : w.params)
    if (key.find("mod_") != std::string::npos)
      for (int64_t i = 0; i < t.size(); ++i) t[i] = mr.normal() * 0.2;
  Rng rng(20);
  body::SampledPoints p = test_points(4, 8, rng);
  Tensor body_img = random_image(cfg.body_res, rng);
  Tensor crop = random_image(cfg.head_res, rng);

  auto objective_for = [&](const std::string& key) {
    return [&, key](Tape& tape, const Var& x) {
      VarMap vm;
      for (const auto& [k, t] : w.params)
        vm.vars.emplace(k, k == key ? x : constant(t));
      RawVars rv = predict_gaussians(constant(body_img), constant(crop), p,
                                     cfg, vm, ForwardMode::infer());
      Var s = ops::add(ops::sum_all(rv.offset_raw), ops::sum_all(rv.rotation_raw));
      s = ops::add(s, ops::sum_all(rv.scale_raw));
      s = ops::add(s, ops::sum_all(rv.opacity_raw));
      return ops::add(s, ops::sum_all(rv.sh_raw));
    };
  };

  // One representative tensor per component. Stage-1/stage-3 context-stream
  // feed-forwards are excluded: with a single fusion layer their outputs are
  // never consumed, so they carry no gradient by construction.
  const char* keys[] = {
      "geo.mlp1.w",          "body_enc.patch.b",     "body_enc.pos",
      "body_enc.blk0.attn.wq", "body_enc.blk3.ff.b1", "body_enc.out_ln.g",
      "head_enc.fuse.b",     "head_enc.blk2.attn.wo", "head_enc.proj1.b",
      "ctx.mlp1.b",          "block0.stage1.mod_q.b", "block0.stage1.attn.wv",
      "block0.stage1.ff_q.b1", "block0.norm_head.g",  "block0.stage3.mod_c.b",
      "block0.stage3.ff_q.b2", "regress.trunk1.b",    "regress.rotation.b",
  };
  for (const char* key : keys) {
    CAPTURE(key);
    auto res = grad_check(objective_for(key), w.at(key), 1e-4);
    CHECK(res.max_rel_err < 1e-4);
  }
}

TEST_CASE("weight files roundtrip bit-exactly") {
  NetworkConfig cfg = NetworkConfig::micro();
  NetworkWeights w = NetworkWeights::init(cfg, 21);
  std::string path = "test_weights.lhw";
  write_weights(w, path);
  NetworkWeights r = read_weights(path);
  REQUIRE(r.params.size() == w.params.size());
  for (const auto& [k, t] : w.params) {
    CAPTURE(k);
    CHECK(bitwise_equal(t, r.at(k)));
  }
  // A second write of the reloaded weights is byte-identical.
  std::string path2 = "test_weights2.lhw";
  write_weights(r, path2);
  auto slurp = [](const std::string& p) {
    FILE* f = std::fopen(p.c_str(), "rb");
    REQUIRE(f);
    std::vector<unsigned char> buf;
    int ch;
    while ((ch = std::fgetc(f)) != EOF) buf.push_back(static_cast<unsigned char>(ch));
    std::fclose(f);
    return buf;
  };
  CHECK(slurp(path) == slurp(path2));
  std::remove(path.c_str());
  std::remove(path2.c_str());
}
