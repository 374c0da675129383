#include "gav/network.hpp"

#include <algorithm>
#include <cmath>

#include "gav/binio.hpp"
#include "gav/ops.hpp"
#include "gav/rng.hpp"

namespace gav {
namespace net {

namespace {

constexpr double kPi = 3.14159265358979323846;

Var ln_unit(const Var& x) {
  int64_t c = x.shape().back();
  Tensor gain({c}), bias({c});
  for (int64_t i = 0; i < c; ++i) gain[i] = 1.0;
  return ops::layer_norm(x, constant(gain), constant(bias));
}

Var mlp2(const Var& x, const VarMap& w, const std::string& prefix) {
  Var h = ops::gelu(ops::linear(x, w.at(prefix + "w1"), w.at(prefix + "b1")));
  return ops::linear(h, w.at(prefix + "w2"), w.at(prefix + "b2"));
}

/// Multi-head attention of x_q against x_kv (self-attention when equal).
Var attention(const Var& x_q, const Var& x_kv, int64_t heads, const VarMap& w,
              const std::string& prefix) {
  Var q = ops::linear(x_q, w.at(prefix + "wq"), w.at(prefix + "bq"));
  Var k = ops::linear(x_kv, w.at(prefix + "wk"), w.at(prefix + "bk"));
  Var v = ops::linear(x_kv, w.at(prefix + "wv"), w.at(prefix + "bv"));
  int64_t c = q.shape().back();
  int64_t d = c / heads;
  std::vector<Var> outs;
  for (int64_t h = 0; h < heads; ++h) {
    Var qh = ops::slice(q, 1, h * d, d);
    Var kh = ops::slice(k, 1, h * d, d);
    Var vh = ops::slice(v, 1, h * d, d);
    Var scores =
        ops::mul(ops::matmul(qh, ops::transpose(kh)), 1.0 / std::sqrt(double(d)));
    outs.push_back(ops::matmul(ops::softmax(scores, 1), vh));
  }
  return ops::linear(ops::concat(1, outs), w.at(prefix + "wo"),
                     w.at(prefix + "bo"));
}

/// modulate(y, scale, shift) = y * (1 + scale) + shift, broadcasting the
/// 1 x C modulation rows over tokens.
Var modulate(const Var& y, const Var& scale, const Var& shift) {
  return ops::add(ops::mul(y, ops::add(scale, 1.0)), shift);
}

/// Gather the pixel rows of a flattened image into patch order.
std::vector<int64_t> patch_order(int64_t res, int64_t patch) {
  std::vector<int64_t> idx;
  idx.reserve(res * res);
  int64_t per_side = res / patch;
  for (int64_t py = 0; py < per_side; ++py)
    for (int64_t px = 0; px < per_side; ++px)
      for (int64_t i = 0; i < patch; ++i)
        for (int64_t j = 0; j < patch; ++j)
          idx.push_back((py * patch + i) * res + (px * patch + j));
  return idx;
}

void check_image_shape(const Var& img, int64_t res, const char* what) {
  if (img.shape() != Shape{res, res, 3})
    throw Error(std::string(what) + ": expected " + std::to_string(res) + "x" +
                std::to_string(res) + "x3 image, got " + shape_str(img.shape()));
}

/// One pre-norm transformer encoder block.
Var encoder_block(const Var& x, int64_t heads, const VarMap& w,
                  const std::string& prefix) {
  Var h = ops::layer_norm(x, w.at(prefix + "ln1.g"), w.at(prefix + "ln1.b"));
  Var y = ops::add(x, attention(h, h, heads, w, prefix + "attn."));
  Var h2 = ops::layer_norm(y, w.at(prefix + "ln2.g"), w.at(prefix + "ln2.b"));
  return ops::add(y, mlp2(h2, w, prefix + "ff."));
}

/// Patch embedding plus encoder stack; returns the token maps after every
/// block (index 0 = after patch embedding, index d = after block d).
std::vector<Var> run_patch_encoder(const Var& image, int64_t res, int64_t patch,
                                   int64_t depth, int64_t heads, const VarMap& w,
                                   const std::string& prefix) {
  int64_t n_tok = (res / patch) * (res / patch);
  Var pixels = ops::reshape(image, {res * res, 3});
  Var patches = ops::reshape(ops::gather_rows(pixels, patch_order(res, patch)),
                             {n_tok, patch * patch * 3});
  Var x = ops::linear(patches, w.at(prefix + "patch.w"), w.at(prefix + "patch.b"));
  x = ops::add(x, w.at(prefix + "pos"));
  std::vector<Var> stages{x};
  for (int64_t d = 0; d < depth; ++d)
    stages.push_back(encoder_block(stages.back(), heads, w,
                                   prefix + "blk" + std::to_string(d) + "."));
  return stages;
}

}  // namespace

void NetworkConfig::validate() const {
  if (token_dim <= 0 || token_dim % heads != 0)
    throw Error("NetworkConfig: token_dim must be a positive multiple of heads");
  if (pos_freqs <= 0) throw Error("NetworkConfig: pos_freqs must be positive");
  if (layers <= 0) throw Error("NetworkConfig: layers must be positive");
  if (body_res % body_patch != 0 || head_res % head_patch != 0)
    throw Error("NetworkConfig: image resolution must be a multiple of patch size");
  if (encoder_depth <= 0) throw Error("NetworkConfig: encoder_depth must be positive");
  for (int i = 0; i < 4; ++i) {
    if (tap_depths[i] < 1 || tap_depths[i] > encoder_depth)
      throw Error("NetworkConfig: tap depths must lie in [1, encoder_depth]");
    if (i > 0 && tap_depths[i] <= tap_depths[i - 1])
      throw Error("NetworkConfig: tap depths must be strictly increasing");
  }
  if (max_mask_ratio < 0 || max_mask_ratio > 0.5)
    throw Error("NetworkConfig: max_mask_ratio must lie in [0, 0.5]");
  if (sh_dim != 3 && sh_dim != 12)
    throw Error("NetworkConfig: sh_dim must be 3 (flat color) or 12 (degree 1)");
  if (mlp_hidden_mult <= 0) throw Error("NetworkConfig: mlp_hidden_mult must be positive");
}

NetworkConfig NetworkConfig::micro() {
  NetworkConfig c;
  c.token_dim = 16;
  c.pos_freqs = 4;
  c.layers = 1;
  c.heads = 2;
  c.body_res = 32;
  c.body_patch = 16;
  c.head_res = 16;
  c.head_patch = 8;
  c.encoder_depth = 4;
  c.tap_depths = {1, 2, 3, 4};
  return c;
}

const Tensor& NetworkWeights::at(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) throw Error("NetworkWeights: missing key " + key);
  return it->second;
}

Tensor& NetworkWeights::at(const std::string& key) {
  auto it = params.find(key);
  if (it == params.end()) throw Error("NetworkWeights: missing key " + key);
  return it->second;
}

int64_t NetworkWeights::total_scalars() const {
  int64_t n = 0;
  for (const auto& [k, t] : params) n += t.size();
  return n;
}

const Var& VarMap::at(const std::string& key) const {
  auto it = vars.find(key);
  if (it == vars.end()) throw Error("VarMap: missing key " + key);
  return it->second;
}

VarMap as_leaves(Tape& tape, const NetworkWeights& w) {
  VarMap m;
  for (const auto& [k, t] : w.params) m.vars.emplace(k, tape.leaf(t));
  return m;
}

VarMap as_constants(const NetworkWeights& w) {
  VarMap m;
  for (const auto& [k, t] : w.params) m.vars.emplace(k, constant(t));
  return m;
}

NetworkWeights NetworkWeights::init(const NetworkConfig& cfg, uint64_t seed) {
  cfg.validate();
  NetworkWeights w;
  Rng rng(seed);
  auto dense = [&](const std::string& key, Shape s) {
    Tensor t(s);
    double scale = 1.0 / std::sqrt(static_cast<double>(s[0]));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * scale;
    w.params.emplace(key, std::move(t));
  };
  auto zeros = [&](const std::string& key, Shape s) {
    w.params.emplace(key, Tensor(s));
  };
  auto ones = [&](const std::string& key, Shape s) {
    Tensor t(s);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = 1.0;
    w.params.emplace(key, std::move(t));
  };
  auto small = [&](const std::string& key, Shape s, double scale) {
    Tensor t(s);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * scale;
    w.params.emplace(key, std::move(t));
  };

  int64_t c = cfg.token_dim;
  int64_t m = cfg.mlp_hidden_mult * c;

  auto linear_pair = [&](const std::string& key, int64_t in, int64_t out) {
    dense(key + ".w", {in, out});
    zeros(key + ".b", {out});
  };
  auto ln_pair = [&](const std::string& key) {
    ones(key + ".g", {c});
    zeros(key + ".b", {c});
  };
  // attention() reads wq/bq, wk/bk, wv/bv, wo/bo under its prefix.
  auto attn = [&](const std::string& prefix) {
    for (const char* nm : {"q", "k", "v", "o"}) {
      dense(prefix + "w" + nm, {c, c});
      zeros(prefix + "b" + nm, {c});
    }
  };
  // mlp2() reads w1/b1, w2/b2 under its prefix.
  auto ff = [&](const std::string& prefix) {
    dense(prefix + "w1", {c, m});
    zeros(prefix + "b1", {m});
    dense(prefix + "w2", {m, c});
    zeros(prefix + "b2", {c});
  };
  auto encoder = [&](const std::string& prefix, int64_t patch, int64_t n_tok) {
    linear_pair(prefix + "patch", patch * patch * 3, c);
    small(prefix + "pos", {n_tok, c}, 0.02);
    for (int64_t d = 0; d < cfg.encoder_depth; ++d) {
      std::string b = prefix + "blk" + std::to_string(d) + ".";
      ln_pair(b + "ln1");
      attn(b + "attn.");
      ln_pair(b + "ln2");
      ff(b + "ff.");
    }
  };
  auto mm_block = [&](const std::string& prefix) {
    zeros(prefix + "mod_q.w", {c, 6 * c});  // zero modulation => identity block
    zeros(prefix + "mod_q.b", {6 * c});
    zeros(prefix + "mod_c.w", {c, 6 * c});
    zeros(prefix + "mod_c.b", {6 * c});
    attn(prefix + "attn.");
    ff(prefix + "ff_q.");
    ff(prefix + "ff_c.");
  };

  linear_pair("geo.mlp1", 6 * cfg.pos_freqs, c);
  linear_pair("geo.mlp2", c, c);

  encoder("body_enc.", cfg.body_patch, cfg.body_tokens());
  ln_pair("body_enc.out_ln");
  linear_pair("body_enc.proj", c, c);

  encoder("head_enc.", cfg.head_patch, cfg.head_tokens());
  linear_pair("head_enc.fuse", 4 * c, c);
  linear_pair("head_enc.proj1", c, c);
  linear_pair("head_enc.proj2", c, c);

  linear_pair("ctx.mlp1", c, c);
  linear_pair("ctx.mlp2", c, c);

  for (int64_t l = 0; l < cfg.layers; ++l) {
    std::string b = "block" + std::to_string(l) + ".";
    mm_block(b + "stage1.");
    ln_pair(b + "norm_head");
    ln_pair(b + "norm_body");
    mm_block(b + "stage3.");
  }

  linear_pair("regress.trunk1", c, c);
  linear_pair("regress.trunk2", c, c);
  // Output heads start small so the bias terms dominate the initial raw
  // parameters (identity-leaning rotations, small visible Gaussians).
  auto head = [&](const std::string& key, int64_t out) {
    small(key + ".w", {c, out}, 0.1 / std::sqrt(static_cast<double>(c)));
    zeros(key + ".b", {out});
  };
  head("regress.offset", 3);
  head("regress.rotation", 4);
  w.at("regress.rotation.b")[0] = 1.0;  // bias toward the identity quaternion
  head("regress.scale", 3);
  // softplus(-3) + 1e-4 ~ 4.9 cm: start near anchor-sized Gaussians.
  for (int64_t i = 0; i < 3; ++i) w.at("regress.scale.b")[i] = -3.0;
  head("regress.opacity", 1);
  w.at("regress.opacity.b")[0] = 1.0;  // sigmoid(1) ~ 0.73: start visible
  head("regress.sh", cfg.sh_dim);
  return w;
}

Tensor positional_encoding(const Tensor& points, int64_t freqs) {
  if (points.rank() != 2 || points.extent(1) != 3)
    throw Error("positional_encoding: expected Nx3 points, got " +
                shape_str(points.shape()));
  points.check_finite("positional_encoding");
  int64_t n = points.extent(0);
  Tensor out({n, 6 * freqs});
  for (int64_t i = 0; i < n; ++i) {
    int64_t col = 0;
    for (int64_t k = 0; k < 3; ++k) {
      double x = points.at2(i, k);
      for (int64_t l = 0; l < freqs; ++l) {
        double arg = std::ldexp(kPi * x, static_cast<int>(l));  // 2^l * pi * x
        out.at2(i, col++) = std::sin(arg);
        out.at2(i, col++) = std::cos(arg);
      }
    }
  }
  return out;
}

Var encode_geometric(const Tensor& points, const NetworkConfig& cfg,
                     const VarMap& w) {
  Var pe = constant(positional_encoding(points, cfg.pos_freqs));
  Var h = ops::gelu(ops::linear(pe, w.at("geo.mlp1.w"), w.at("geo.mlp1.b")));
  return ops::linear(h, w.at("geo.mlp2.w"), w.at("geo.mlp2.b"));
}

Var encode_body_image(const Var& image, const NetworkConfig& cfg,
                      const VarMap& w) {
  check_image_shape(image, cfg.body_res, "encode_body_image");
  std::vector<Var> stages =
      run_patch_encoder(image, cfg.body_res, cfg.body_patch, cfg.encoder_depth,
                        cfg.heads, w, "body_enc.");
  Var h = ops::layer_norm(stages.back(), w.at("body_enc.out_ln.g"),
                          w.at("body_enc.out_ln.b"));
  return ops::linear(h, w.at("body_enc.proj.w"), w.at("body_enc.proj.b"));
}

Var encode_head_pyramid(const Var& crop, const NetworkConfig& cfg,
                        const VarMap& w) {
  check_image_shape(crop, cfg.head_res, "encode_head_pyramid");
  std::vector<Var> stages =
      run_patch_encoder(crop, cfg.head_res, cfg.head_patch, cfg.encoder_depth,
                        cfg.heads, w, "head_enc.");
  std::vector<Var> taps;
  for (int i = 0; i < 4; ++i) taps.push_back(stages[cfg.tap_depths[i]]);
  Var fused = ops::linear(ops::concat(1, taps), w.at("head_enc.fuse.w"),
                          w.at("head_enc.fuse.b"));
  Var h = ops::gelu(
      ops::linear(fused, w.at("head_enc.proj1.w"), w.at("head_enc.proj1.b")));
  return ops::linear(h, w.at("head_enc.proj2.w"), w.at("head_enc.proj2.b"));
}

Var global_context(const Var& body_tokens, const NetworkConfig& cfg,
                   const VarMap& w) {
  if (body_tokens.shape().size() != 2 || body_tokens.shape()[0] == 0)
    throw Error("global_context: need a nonempty NxC token sequence");
  Var pooled = ops::reduce(ops::ReduceOp::Max, body_tokens, 0, /*keepdim=*/true);
  Var h = ops::gelu(ops::linear(pooled, w.at("ctx.mlp1.w"), w.at("ctx.mlp1.b")));
  return ops::linear(h, w.at("ctx.mlp2.w"), w.at("ctx.mlp2.b"));
}

StreamPair mm_transformer_block(const Var& query, const Var& context,
                                const Var& f_global, const NetworkConfig& cfg,
                                const VarMap& w, const std::string& prefix) {
  if (query.shape().back() != context.shape().back())
    throw Error("mm_transformer_block: stream width mismatch");
  int64_t c = cfg.token_dim;
  int64_t nq = query.shape()[0];
  int64_t nc = context.shape()[0];

  // Modulation: each stream gets (scale, shift, gate) for the attention
  // sublayer and for the feed-forward sublayer, all from the global context.
  auto mods = [&](const char* which) {
    Var raw = ops::linear(f_global, w.at(prefix + which + std::string(".w")),
                          w.at(prefix + which + std::string(".b")));
    std::vector<Var> parts;
    for (int i = 0; i < 6; ++i) parts.push_back(ops::slice(raw, 1, i * c, c));
    return parts;  // scale1, shift1, gate1, scale2, shift2, gate2
  };
  std::vector<Var> mq = mods("mod_q"), mc = mods("mod_c");

  Var hq = modulate(ln_unit(query), mq[0], mq[1]);
  Var hc = modulate(ln_unit(context), mc[0], mc[1]);
  Var joint = ops::concat(0, {hq, hc});
  Var att = attention(joint, joint, cfg.heads, w, prefix + "attn.");
  Var q1 = ops::add(query, ops::mul(mq[2], ops::slice(att, 0, 0, nq)));
  Var c1 = ops::add(context, ops::mul(mc[2], ops::slice(att, 0, nq, nc)));

  Var q2 = ops::add(
      q1, ops::mul(mq[5], mlp2(modulate(ln_unit(q1), mq[3], mq[4]), w,
                               prefix + "ff_q.")));
  Var c2 = ops::add(
      c1, ops::mul(mc[5], mlp2(modulate(ln_unit(c1), mc[3], mc[4]), w,
                               prefix + "ff_c.")));
  return {q2, c2};
}

std::vector<int64_t> shrink_keep_indices(int64_t n_tokens, double ratio,
                                         uint64_t seed, double max_ratio) {
  if (ratio < 0 || ratio > max_ratio)
    throw Error("shrink_head_tokens: ratio " + std::to_string(ratio) +
                " outside [0, " + std::to_string(max_ratio) + "]");
  int64_t k = static_cast<int64_t>(std::floor(ratio * n_tokens));
  std::vector<int64_t> idx(n_tokens);
  for (int64_t i = 0; i < n_tokens; ++i) idx[i] = i;
  if (k == 0) return idx;
  Rng rng(seed);
  // Partial Fisher-Yates: the first k entries become the dropped set.
  for (int64_t i = 0; i < k; ++i)
    std::swap(idx[i], idx[i + static_cast<int64_t>(rng.uniform_int(n_tokens - i))]);
  std::vector<int64_t> keep(idx.begin() + k, idx.end());
  std::sort(keep.begin(), keep.end());
  return keep;
}

Var shrink_head_tokens(const Var& head_tokens, double ratio, uint64_t seed,
                       const NetworkConfig& cfg) {
  int64_t n = head_tokens.shape()[0];
  std::vector<int64_t> keep =
      shrink_keep_indices(n, ratio, seed, cfg.max_mask_ratio);
  if (static_cast<int64_t>(keep.size()) == n) return head_tokens;  // bitwise no-op
  return ops::gather_rows(head_tokens, keep);
}

GeoStreams fusion_block(const GeoStreams& s, const Var& f_global,
                        const NetworkConfig& cfg, const VarMap& w,
                        const std::string& prefix) {
  int64_t n_head = s.geo_head.shape()[0];
  int64_t n_body = s.geo_body.shape()[0];
  StreamPair st1 = mm_transformer_block(s.geo_head, s.img_head, f_global, cfg,
                                        w, prefix + "stage1.");
  Var nh = ops::layer_norm(st1.query, w.at(prefix + "norm_head.g"),
                           w.at(prefix + "norm_head.b"));
  Var nb = ops::layer_norm(s.geo_body, w.at(prefix + "norm_body.g"),
                           w.at(prefix + "norm_body.b"));
  Var t3d = ops::concat(0, {nh, nb});
  StreamPair st3 =
      mm_transformer_block(t3d, s.img_body, f_global, cfg, w, prefix + "stage3.");
  GeoStreams out;
  out.geo_head = ops::slice(st3.query, 0, 0, n_head);
  out.geo_body = ops::slice(st3.query, 0, n_head, n_body);
  out.img_head = st1.context;
  out.img_body = st3.context;
  return out;
}

RawVars predict_gaussians(const Var& body_image, const Var& head_crop,
                          const body::SampledPoints& points,
                          const NetworkConfig& cfg, const VarMap& w,
                          const ForwardMode& mode) {
  cfg.validate();
  int64_t n = points.count();
  if (n == 0) throw Error("predict_gaussians: no anchor points");
  std::vector<int64_t> head_idx, body_idx;
  for (int64_t i = 0; i < n; ++i)
    (points.region[i] == body::kHead ? head_idx : body_idx).push_back(i);
  if (head_idx.empty() || body_idx.empty())
    throw Error("predict_gaussians: anchors must include both head and body points");

  Var geo_all = encode_geometric(points.positions, cfg, w);
  GeoStreams s;
  s.geo_head = ops::gather_rows(geo_all, head_idx);
  s.geo_body = ops::gather_rows(geo_all, body_idx);
  s.img_body = encode_body_image(body_image, cfg, w);
  s.img_head = encode_head_pyramid(head_crop, cfg, w);
  Var f_global = global_context(s.img_body, cfg, w);
  if (mode.train)
    s.img_head = shrink_head_tokens(s.img_head, mode.mask_ratio, mode.mask_seed, cfg);

  for (int64_t l = 0; l < cfg.layers; ++l)
    s = fusion_block(s, f_global, cfg, w, "block" + std::to_string(l) + ".");

  // (head, body) concatenation back to input point order.
  std::vector<int64_t> inverse(n);
  {
    int64_t pos = 0;
    std::vector<int64_t> perm;
    perm.reserve(n);
    perm.insert(perm.end(), head_idx.begin(), head_idx.end());
    perm.insert(perm.end(), body_idx.begin(), body_idx.end());
    for (int64_t i = 0; i < n; ++i) inverse[perm[i]] = pos++;
  }
  Var geo = ops::gather_rows(ops::concat(0, {s.geo_head, s.geo_body}), inverse);

  Var h = ops::gelu(
      ops::linear(geo, w.at("regress.trunk1.w"), w.at("regress.trunk1.b")));
  h = ops::gelu(ops::linear(h, w.at("regress.trunk2.w"), w.at("regress.trunk2.b")));
  RawVars out;
  out.offset_raw = ops::linear(h, w.at("regress.offset.w"), w.at("regress.offset.b"));
  out.rotation_raw =
      ops::linear(h, w.at("regress.rotation.w"), w.at("regress.rotation.b"));
  out.scale_raw = ops::linear(h, w.at("regress.scale.w"), w.at("regress.scale.b"));
  out.opacity_raw =
      ops::linear(h, w.at("regress.opacity.w"), w.at("regress.opacity.b"));
  out.sh_raw = ops::linear(h, w.at("regress.sh.w"), w.at("regress.sh.b"));
  return out;
}

splat::RawGaussianParams predict_gaussians_value(
    const Tensor& body_image, const Tensor& head_crop,
    const body::SampledPoints& points, const NetworkConfig& cfg,
    const NetworkWeights& w) {
  Tape tape;
  VarMap vm = as_constants(w);
  RawVars rv = predict_gaussians(constant(body_image), constant(head_crop),
                                 points, cfg, vm, ForwardMode::infer());
  splat::RawGaussianParams out;
  out.offset_raw = rv.offset_raw.value();
  out.rotation_raw = rv.rotation_raw.value();
  out.scale_raw = rv.scale_raw.value();
  out.opacity_raw = rv.opacity_raw.value();
  out.sh_raw = rv.sh_raw.value();
  return out;
}

void write_weights(const NetworkWeights& w, const std::string& path) {
  BinWriter b;
  b.tag("LHW1");
  b.u32(1);
  b.u32(static_cast<uint32_t>(w.params.size()));
  for (const auto& [key, t] : w.params) {  // std::map: sorted, deterministic
    b.str(key);
    b.u32(static_cast<uint32_t>(t.rank()));
    for (int64_t d = 0; d < t.rank(); ++d) b.u64(static_cast<uint64_t>(t.extent(d)));
    b.f64_array(t);
  }
  b.save(path);
}

NetworkWeights read_weights(const std::string& path) {
  BinReader r = BinReader::from_file(path);
  r.set_context("weights header");
  if (r.tag() != "LHW1") throw Error(path + ": bad magic, not a weights file");
  uint32_t ver = r.u32();
  if (ver != 1) throw Error(path + ": unsupported version " + std::to_string(ver));
  uint32_t count = r.u32();
  NetworkWeights w;
  for (uint32_t i = 0; i < count; ++i) {
    r.set_context("weights entry " + std::to_string(i));
    std::string key = r.str();
    uint32_t rank = r.u32();
    Shape s;
    for (uint32_t d = 0; d < rank; ++d) s.push_back(static_cast<int64_t>(r.u64()));
    w.params.emplace(key, r.f64_tensor(std::move(s)));
  }
  if (!r.eof()) throw Error(path + ": trailing bytes after weights");
  return w;
}

}  // namespace net
}  // namespace gav
