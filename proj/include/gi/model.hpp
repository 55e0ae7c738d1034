// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0
//
// The full model: a linear token embedding, K stacked 1D-Swin blocks, a
// centred crop to m tokens, dense transformer block(s) with relative position
// bias, and linear per-track heads followed by softplus.
//
//   h_0 = x·E + e
//   h_ℓ = swin_ℓ(h_{ℓ−1}),  ℓ = 1..K
//   y   = softplus(Final(crop(h_K, m))·W + b)

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gi/config.hpp"
#include "gi/swin1d.hpp"

namespace gi {

struct InterpreterConfig {
  std::size_t n = 16;        ///< input tokens (base pairs)
  std::size_t d_in = 4;      ///< input channels
  std::size_t d_model = 4;   ///< embedding width d₀
  std::vector<Swin1dConfig> layers;
  std::size_t m = 4;         ///< output bins
  std::size_t tracks = 3;    ///< T
  std::size_t final_blocks = 1;
  std::size_t final_heads = 1;
  bool final_ff = true;
  bool softplus = true;
  std::vector<std::string> track_groups;  ///< one label per track

  std::size_t depth() const { return layers.size(); }
  /// Token count entering each layer, plus the count after the last one (K+1 entries).
  std::vector<std::size_t> token_counts() const;
  /// Width entering each layer, plus the final width (K+1 entries).
  std::vector<std::size_t> widths() const;
  /// Throws ConfigError naming the first violated invariant.
  void validate() const;
};

/// Largest K with ⌊n/2^K⌋ ≥ m.
std::size_t auto_depth(std::size_t n, std::size_t m);

/// α per layer: 1 while doubling stays within width_cap, 2 afterwards.
std::vector<double> alpha_schedule(std::size_t d_model, std::size_t depth, std::size_t width_cap);

/// Reads the [model] section; see README for keys. Per-layer lists override scalar defaults.
InterpreterConfig model_config_from_tree(const ConfigTree& tree);
/// Writes a [model] section with explicit per-layer lists; parses back to an equal config.
void model_config_to_tree(const InterpreterConfig& config, ConfigTree& tree);

template <class T>
struct InterpreterWeights {
  T embed_w, embed_b;
  std::vector<SwinWeights<T>> swin;
  std::vector<MhaWeights<T>> final_blocks;
  T head_w, head_b;
};

using InterpreterParams = InterpreterWeights<Tensor<double>>;

template <class T, class Fn>
void for_each_tensor(InterpreterWeights<T>& w, Fn&& fn) {
  fn("embed_w", w.embed_w);
  fn("embed_b", w.embed_b);
  for (std::size_t i = 0; i < w.swin.size(); ++i) for_each_tensor(w.swin[i], "swin" + std::to_string(i + 1) + ".", fn);
  for (std::size_t i = 0; i < w.final_blocks.size(); ++i)
    for_each_tensor(w.final_blocks[i], "final" + std::to_string(i + 1) + ".", fn);
  fn("head_w", w.head_w);
  fn("head_b", w.head_b);
}

template <class U, class T, class Fn>
InterpreterWeights<U> map_tensors(const InterpreterWeights<T>& w, Fn&& fn) {
  InterpreterWeights<U> out;
  out.embed_w = fn("embed_w", w.embed_w);
  out.embed_b = fn("embed_b", w.embed_b);
  for (std::size_t i = 0; i < w.swin.size(); ++i)
    out.swin.push_back(map_tensors<U>(w.swin[i], "swin" + std::to_string(i + 1) + ".", fn));
  for (std::size_t i = 0; i < w.final_blocks.size(); ++i)
    out.final_blocks.push_back(map_tensors<U>(w.final_blocks[i], "final" + std::to_string(i + 1) + ".", fn));
  out.head_w = fn("head_w", w.head_w);
  out.head_b = fn("head_b", w.head_b);
  return out;
}

/// Deterministic initialisation from a seed.
InterpreterParams build(const InterpreterConfig& config, std::uint64_t seed);

/// Places every parameter on the tape as a leaf (cast to Real).
template <class Real>
InterpreterWeights<Var<Real>> bind(Tape<Real>& tape, const InterpreterParams& params, bool requires_grad);

/// Per-layer geometry of the captured attention maps.
struct AtlasLayer {
  std::size_t layer = 0;   ///< 1-based
  std::size_t tokens = 0;  ///< tokens entering the layer
  std::size_t span = 1;    ///< input positions per token, 2^(layer−1)
  std::size_t window = 0;
  std::size_t shift = 0;    ///< roll applied before the slot-2 partition
  std::size_t windows = 0;  ///< ⌈tokens/window⌉
  std::size_t heads = 0;
};

struct AttentionAtlas {
  std::vector<AtlasLayer> layers;
  std::vector<AttentionRecord> records;  ///< ordered by layer, slot, window
};

/// Geometry of the atlas a forward pass with this config captures.
std::vector<AtlasLayer> atlas_layout(const InterpreterConfig& config);
/// Σ_ℓ 2·⌈n_ℓ/k_ℓ⌉.
std::size_t atlas_record_count(const InterpreterConfig& config);

/// Centred crop: drops ⌊(L−m)/2⌋ leading and ⌈(L−m)/2⌉ trailing tokens.
template <class Real>
Var<Real> crop(Var<Real> h, std::size_t m);

/// Dense attention sublayer over all tokens, with relative position bias.
template <class Real>
Var<Real> final_transformer_block(Var<Real> h, const MhaWeights<Var<Real>>& p);

template <class Real>
struct ModelOutput {
  Var<Real> prediction;   ///< m × T
  Var<Real> encoded;      ///< h_K
  std::optional<AttentionAtlas> atlas;
};

template <class Real>
ModelOutput<Real> forward(const InterpreterWeights<Var<Real>>& p, Var<Real> x, const InterpreterConfig& config,
                          bool capture = false);

/// Inference on a fresh gradient-free tape.
template <class Real = double>
Tensor<double> predict(const InterpreterParams& params, const InterpreterConfig& config, const Tensor<double>& x);

struct MaddReport {
  std::uint64_t embed = 0;
  std::vector<BlockMadds> swin;
  BlockMadds final_blocks;
  std::uint64_t heads = 0;

  std::uint64_t swin_score() const;
  std::uint64_t score() const;
  std::uint64_t mix() const;
  std::uint64_t total() const;
};

/// Closed-form multiply-adds of one forward pass; matches the tape counter exactly.
MaddReport count_madds(const InterpreterConfig& config);

/// Checkpoint file:
///   8 bytes "GICKPT01", u64 version (1), string config text,
///   u64 tensor count, then per tensor: string name, u64 rank, rank × u64 dims,
///   values as f64. Strings are u64 length + bytes. Little-endian throughout.
void save_checkpoint(const std::string& path, const InterpreterConfig& config, const InterpreterParams& params);

struct Checkpoint {
  InterpreterConfig config;
  InterpreterParams params;
};

Checkpoint load_checkpoint(const std::string& path);

/// Throws DimensionError when params do not have the shapes config implies.
void validate_params(const InterpreterConfig& config, const InterpreterParams& params);

}  // namespace gi
