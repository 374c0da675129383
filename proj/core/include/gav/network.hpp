#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gav/body_model.hpp"
#include "gav/gaussians.hpp"
#include "gav/tape.hpp"
#include "gav/tensor.hpp"

namespace gav {
namespace net {

/// Architecture hyperparameters. The defaults are the desk-scale test
/// configuration; micro() is the configuration used by end-to-end gradient
/// checks.
struct NetworkConfig {
  int64_t token_dim = 64;  // width of every token stream; divisible by heads
  int64_t pos_freqs = 8;   // sinusoidal frequencies per coordinate
  int64_t layers = 2;      // fusion blocks
  int64_t heads = 4;

  int64_t body_res = 128;  // body image H = W
  int64_t body_patch = 16;
  int64_t head_res = 64;  // head crop H = W
  int64_t head_patch = 8;

  int64_t encoder_depth = 8;                   // image encoder blocks
  std::array<int64_t, 4> tap_depths{2, 4, 6, 8};  // pyramid taps, 1-based
  int64_t mlp_hidden_mult = 2;                 // feed-forward expansion

  double max_mask_ratio = 0.5;  // head-token drop ratio upper bound
  int64_t sh_dim = 12;          // spherical-harmonic channels per Gaussian

  int64_t body_tokens() const { return (body_res / body_patch) * (body_res / body_patch); }
  int64_t head_tokens() const { return (head_res / head_patch) * (head_res / head_patch); }
  void validate() const;

  static NetworkConfig micro();
};

/// All learnable arrays, keyed by a stable path string. Keys and shapes are
/// a pure function of the NetworkConfig.
struct NetworkWeights {
  std::map<std::string, Tensor> params;

  const Tensor& at(const std::string& key) const;
  Tensor& at(const std::string& key);
  int64_t total_scalars() const;

  /// Deterministic initialization from a seed (gates zeroed, rotation head
  /// biased toward the identity quaternion).
  static NetworkWeights init(const NetworkConfig& cfg, uint64_t seed);
};

/// The weights as tape variables (training) or constants (inference).
struct VarMap {
  std::map<std::string, Var> vars;
  const Var& at(const std::string& key) const;
};
VarMap as_leaves(Tape& tape, const NetworkWeights& w);
VarMap as_constants(const NetworkWeights& w);

/// Sinusoidal positional encoding of 3-D points: for each coordinate x,
/// [sin(2^l pi x), cos(2^l pi x)] for l = 0..freqs-1, giving 6*freqs columns.
Tensor positional_encoding(const Tensor& points, int64_t freqs);

/// Geometric tokens: positional encoding + 2-layer MLP to token_dim.
/// Rows keep the input point order.
Var encode_geometric(const Tensor& points, const NetworkConfig& cfg,
                     const VarMap& w);

/// Patch-transformer body image encoder -> body_tokens() x token_dim.
Var encode_body_image(const Var& image, const NetworkConfig& cfg,
                      const VarMap& w);

/// Head encoder with feature-pyramid fusion: token maps captured at the 4
/// tap depths are concatenated channelwise, mixed per token, and projected
/// to token_dim. -> head_tokens() x token_dim.
Var encode_head_pyramid(const Var& crop, const NetworkConfig& cfg,
                        const VarMap& w);

/// Channelwise max over tokens followed by a 2-layer MLP -> 1 x token_dim.
Var global_context(const Var& body_tokens, const NetworkConfig& cfg,
                   const VarMap& w);

/// One joint-attention fusion block with adaptive-norm modulation from the
/// global context. Returns (updated query stream, updated context stream);
/// gate projections are zero at init, making the block an identity map.
struct StreamPair {
  Var query, context;
};
StreamPair mm_transformer_block(const Var& query, const Var& context,
                                const Var& f_global, const NetworkConfig& cfg,
                                const VarMap& w, const std::string& prefix);

/// Deterministically drops floor(ratio * N) rows, chosen without
/// replacement from the seed; survivors keep their relative order.
/// Returns the kept row indices; ratio 0 keeps everything.
std::vector<int64_t> shrink_keep_indices(int64_t n_tokens, double ratio,
                                         uint64_t seed, double max_ratio);
Var shrink_head_tokens(const Var& head_tokens, double ratio, uint64_t seed,
                       const NetworkConfig& cfg);

/// The full fusion block: head stage, normalized concatenation of the two
/// geometric streams, body stage, then split back by stored counts.
struct GeoStreams {
  Var geo_head, geo_body, img_head, img_body;
};
GeoStreams fusion_block(const GeoStreams& s, const Var& f_global,
                        const NetworkConfig& cfg, const VarMap& w,
                        const std::string& prefix);

/// Mode for predict_gaussians: inference, or training with a head-token
/// drop ratio and seed.
struct ForwardMode {
  bool train = false;
  double mask_ratio = 0;
  uint64_t mask_seed = 0;

  static ForwardMode infer() { return {}; }
  static ForwardMode training(double ratio, uint64_t seed) {
    return {true, ratio, seed};
  }
};

/// Raw (pre-activation) per-Gaussian parameters as tape variables, rows in
/// input point order.
struct RawVars {
  Var offset_raw, rotation_raw, scale_raw, opacity_raw, sh_raw;
};

/// Single feed-forward pass: tokenize, fuse, regress.
RawVars predict_gaussians(const Var& body_image, const Var& head_crop,
                          const body::SampledPoints& points,
                          const NetworkConfig& cfg, const VarMap& w,
                          const ForwardMode& mode);

/// Value-level convenience wrapper (inference).
splat::RawGaussianParams predict_gaussians_value(
    const Tensor& body_image, const Tensor& head_crop,
    const body::SampledPoints& points, const NetworkConfig& cfg,
    const NetworkWeights& w);

/// Keyed, versioned weight serialization; float64, bit-exact roundtrip.
void write_weights(const NetworkWeights& w, const std::string& path);
NetworkWeights read_weights(const std::string& path);

}  // namespace net
}  // namespace gav
