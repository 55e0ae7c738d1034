// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0

#include "gi/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "gi/binary_io.hpp"

namespace gi {
namespace {

constexpr char kCheckpointMagic[8] = {'G', 'I', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint64_t kCheckpointVersion = 1;

Tensor<double> gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor<double> t({rows, cols});
  const double stddev = 1.0 / std::sqrt(static_cast<double>(rows));
  for (double& v : t.data()) v = stddev * rng.normal();
  return t;
}

template <class T>
std::vector<T> per_layer(std::vector<T> values, std::size_t depth, T fallback, const char* key) {
  if (values.empty()) return std::vector<T>(depth, fallback);
  if (values.size() != depth)
    throw ConfigError(std::string("model.") + key + " lists " + std::to_string(values.size()) + " values for " +
                      std::to_string(depth) + " layers");
  return values;
}

}  // namespace

std::vector<std::size_t> InterpreterConfig::token_counts() const {
  std::vector<std::size_t> counts{n};
  for (std::size_t i = 0; i < layers.size(); ++i) counts.push_back(counts.back() / 2);
  return counts;
}

std::vector<std::size_t> InterpreterConfig::widths() const {
  std::vector<std::size_t> w{d_model};
  for (const Swin1dConfig& c : layers) w.push_back(swin_output_width(c, w.back()));
  return w;
}

void InterpreterConfig::validate() const {
  if (n == 0 || d_in == 0 || d_model == 0 || m == 0 || tracks == 0)
    throw ConfigError("n, d_in, d_model, m and tracks must all be positive");
  const std::vector<std::size_t> counts = token_counts();
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (counts[i] < 2)
      throw ConfigError("layer " + std::to_string(i + 1) + " receives " + std::to_string(counts[i]) +
                        " tokens; a 1D-Swin block needs at least 2");
  if (counts.back() < m)
    throw ConfigError("floor(n/2^K) = " + std::to_string(counts.back()) + " is below the output length m = " +
                      std::to_string(m));
  std::size_t width = d_model;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    try {
      const std::size_t next = swin_output_width(layers[i], width);
      if (layers[i].heads == 0 || width % layers[i].heads != 0)
        throw ConfigError("width " + std::to_string(width) + " is not divisible by " +
                          std::to_string(layers[i].heads) + " heads");
      width = next;
    } catch (const ConfigError& e) {
      throw ConfigError("layer " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  if (final_heads == 0 || width % final_heads != 0)
    throw ConfigError("final width " + std::to_string(width) + " is not divisible by " + std::to_string(final_heads) +
                      " heads");
  if (track_groups.size() != tracks)
    throw ConfigError("track_groups has " + std::to_string(track_groups.size()) + " labels for " +
                      std::to_string(tracks) + " tracks");
}

std::size_t auto_depth(std::size_t n, std::size_t m) {
  if (m == 0) throw ConfigError("output length m must be positive");
  std::size_t depth = 0;
  while ((n >> (depth + 1)) >= m && (n >> depth) >= 2) ++depth;
  return depth;
}

std::vector<double> alpha_schedule(std::size_t d_model, std::size_t depth, std::size_t width_cap) {
  std::vector<double> alphas;
  std::size_t width = d_model;
  for (std::size_t i = 0; i < depth; ++i) {
    if (2 * width <= width_cap) {
      alphas.push_back(1.0);
      width *= 2;
    } else {
      alphas.push_back(2.0);
    }
  }
  return alphas;
}

InterpreterConfig model_config_from_tree(const ConfigTree& tree) {
  InterpreterConfig c;
  c.n = get_size(tree, "model.n", c.n);
  c.d_in = get_size(tree, "model.d_in", c.d_in);
  c.d_model = get_size(tree, "model.d_model", c.d_model);
  c.m = get_size(tree, "model.m", c.m);
  c.tracks = get_size(tree, "model.tracks", c.tracks);
  std::size_t depth = get_size(tree, "model.K", 0);
  if (depth == 0) depth = auto_depth(c.n, c.m);

  const std::size_t window = get_size(tree, "model.window", 4);
  const std::size_t heads = get_size(tree, "model.heads", 1);
  const std::size_t shift = get_size(tree, "model.shift", window / 2);
  const std::size_t width_cap = get_size(tree, "model.width_cap", 0);
  const bool ff = get_bool(tree, "model.ff", true);
  const bool rel_bias = get_bool(tree, "model.rel_bias", true);

  std::vector<double> alphas = get_double_list(tree, "model.alphas");
  if (alphas.empty()) {
    alphas = width_cap > 0 ? alpha_schedule(c.d_model, depth, width_cap) : std::vector<double>(depth, 1.0);
  }
  alphas = per_layer(alphas, depth, 1.0, "alphas");
  const auto windows = per_layer(get_size_list(tree, "model.windows"), depth, window, "windows");
  const auto shifts = per_layer(get_size_list(tree, "model.shifts"), depth, shift, "shifts");
  const auto layer_heads = per_layer(get_size_list(tree, "model.layer_heads"), depth, heads, "layer_heads");
  for (std::size_t i = 0; i < depth; ++i) {
    Swin1dConfig s;
    s.window = windows[i];
    s.shift = shifts[i];
    s.alpha = alphas[i];
    s.heads = layer_heads[i];
    s.ff = ff;
    s.rel_bias = rel_bias;
    c.layers.push_back(s);
  }
  c.final_blocks = get_size(tree, "model.final_blocks", c.final_blocks);
  c.final_heads = get_size(tree, "model.final_heads", heads);
  c.final_ff = get_bool(tree, "model.final_ff", ff);
  c.softplus = get_bool(tree, "model.softplus", c.softplus);
  c.track_groups = get_list(tree, "model.track_groups");
  if (c.track_groups.empty()) c.track_groups.assign(c.tracks, "default");
  c.validate();
  return c;
}

void model_config_to_tree(const InterpreterConfig& c, ConfigTree& tree) {
  std::vector<std::size_t> windows, shifts, heads;
  std::vector<double> alphas;
  bool ff = true, rel_bias = true;
  for (const Swin1dConfig& s : c.layers) {
    windows.push_back(s.window);
    shifts.push_back(s.shift);
    heads.push_back(s.heads);
    alphas.push_back(s.alpha);
    ff = s.ff;
    rel_bias = s.rel_bias;
  }
  tree.put("model.n", c.n);
  tree.put("model.d_in", c.d_in);
  tree.put("model.d_model", c.d_model);
  tree.put("model.m", c.m);
  tree.put("model.tracks", c.tracks);
  tree.put("model.K", c.layers.size());
  tree.put("model.windows", join(windows));
  tree.put("model.shifts", join(shifts));
  tree.put("model.alphas", join(alphas));
  tree.put("model.layer_heads", join(heads));
  tree.put("model.ff", ff ? "true" : "false");
  tree.put("model.rel_bias", rel_bias ? "true" : "false");
  tree.put("model.final_blocks", c.final_blocks);
  tree.put("model.final_heads", c.final_heads);
  tree.put("model.final_ff", c.final_ff ? "true" : "false");
  tree.put("model.softplus", c.softplus ? "true" : "false");
  tree.put("model.track_groups", join(c.track_groups));
}

InterpreterParams build(const InterpreterConfig& config, std::uint64_t seed) {
  config.validate();
  const Rng root(seed);
  const std::vector<std::size_t> widths = config.widths();

  InterpreterParams p;
  Rng embed_rng = root.fork(0);
  p.embed_w = gaussian(config.d_in, config.d_model, embed_rng);
  p.embed_b = Tensor<double>({config.d_model});
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    Rng layer_rng = root.fork(1 + i);
    p.swin.push_back(init_swin(config.layers[i], widths[i], layer_rng));
  }
  const std::size_t top = widths.back();
  for (std::size_t i = 0; i < config.final_blocks; ++i) {
    Rng block_rng = root.fork(1000 + i);
    p.final_blocks.push_back(init_mha(MhaShape{top, config.final_heads, config.final_ff, config.m}, block_rng));
  }
  Rng head_rng = root.fork(2000);
  p.head_w = gaussian(top, config.tracks, head_rng);
  p.head_b = Tensor<double>({config.tracks});
  return p;
}

void validate_params(const InterpreterConfig& config, const InterpreterParams& params) {
  const InterpreterParams expected = build(config, 0);
  InterpreterParams actual = params;
  std::vector<std::pair<std::string, Shape>> want;
  InterpreterParams shapes = expected;
  for_each_tensor(shapes, [&](const std::string& name, Tensor<double>& t) { want.emplace_back(name, t.shape()); });
  std::size_t i = 0;
  bool count_ok = true;
  for_each_tensor(actual, [&](const std::string& name, Tensor<double>& t) {
    if (i >= want.size()) {
      count_ok = false;
      return;
    }
    if (want[i].first != name || want[i].second != t.shape())
      throw DimensionError("parameter " + name + " has shape " + shape_string(t.shape()) + ", config expects " +
                           want[i].first + " " + shape_string(want[i].second));
    ++i;
  });
  if (!count_ok || i != want.size()) throw DimensionError("parameter set does not match the model config");
}

template <class Real>
InterpreterWeights<Var<Real>> bind(Tape<Real>& tape, const InterpreterParams& params, bool requires_grad) {
  return map_tensors<Var<Real>>(params, [&](const std::string&, const Tensor<double>& t) {
    if constexpr (std::is_same_v<Real, double>)
      return tape.leaf(t, requires_grad);
    else
      return tape.leaf(t.template cast<Real>(), requires_grad);
  });
}

std::vector<AtlasLayer> atlas_layout(const InterpreterConfig& config) {
  std::vector<AtlasLayer> layers;
  const std::vector<std::size_t> counts = config.token_counts();
  std::size_t span = 1;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    AtlasLayer l;
    l.layer = i + 1;
    l.tokens = counts[i];
    l.span = span;
    l.window = config.layers[i].window;
    l.shift = config.layers[i].shift;
    l.windows = window_lengths(counts[i], l.window).size();
    l.heads = config.layers[i].heads;
    layers.push_back(l);
    span *= 2;
  }
  return layers;
}

std::size_t atlas_record_count(const InterpreterConfig& config) {
  std::size_t total = 0;
  for (const AtlasLayer& l : atlas_layout(config)) total += 2 * l.windows;
  return total;
}

template <class Real>
Var<Real> crop(Var<Real> h, std::size_t m) {
  const std::size_t len = h.rows();
  if (len < m) throw ContractError("crop: " + std::to_string(len) + " tokens cannot be cropped to " + std::to_string(m));
  if (len == m) return h;
  return slice_rows(h, (len - m) / 2, m);
}

template <class Real>
Var<Real> final_transformer_block(Var<Real> h, const MhaWeights<Var<Real>>& p) {
  return multi_head_attention(p, h, false).output;
}

template <class Real>
ModelOutput<Real> forward(const InterpreterWeights<Var<Real>>& p, Var<Real> x, const InterpreterConfig& config,
                          bool capture) {
  if (x.value().rank() != 2 || x.rows() != config.n || x.cols() != config.d_in)
    throw DimensionError("model input " + shape_string(x.shape()) + " does not match config [" +
                         std::to_string(config.n) + "x" + std::to_string(config.d_in) + "]");
  if (p.swin.size() != config.layers.size() || p.final_blocks.size() != config.final_blocks)
    throw DimensionError("parameter layer count does not match the model config");

  ModelOutput<Real> out;
  if (capture) {
    out.atlas.emplace();
    out.atlas->layers = atlas_layout(config);
  }
  Var<Real> h = linear(x, p.embed_w, p.embed_b);
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    SwinOutput<Real> block = swin1d_forward(h, p.swin[i], config.layers[i], capture, i + 1);
    h = block.output;
    if (capture)
      for (AttentionRecord& r : block.records) out.atlas->records.push_back(std::move(r));
  }
  out.encoded = h;
  h = crop(h, config.m);
  for (const MhaWeights<Var<Real>>& block : p.final_blocks) h = final_transformer_block(h, block);
  Var<Real> y = linear(h, p.head_w, p.head_b);
  if (config.softplus) y = softplus(y);
  out.prediction = y;
  return out;
}

template <class Real>
Tensor<double> predict(const InterpreterParams& params, const InterpreterConfig& config, const Tensor<double>& x) {
  Tape<Real> tape(false);
  const InterpreterWeights<Var<Real>> weights = bind(tape, params, false);
  Var<Real> input;
  if constexpr (std::is_same_v<Real, double>)
    input = tape.constant(x);
  else
    input = tape.constant(x.template cast<Real>());
  return forward(weights, input, config, false).prediction.value().template cast<double>();
}

std::uint64_t MaddReport::swin_score() const {
  std::uint64_t s = 0;
  for (const BlockMadds& b : swin) s += b.score;
  return s;
}

std::uint64_t MaddReport::score() const { return swin_score() + final_blocks.score; }

std::uint64_t MaddReport::mix() const {
  std::uint64_t s = final_blocks.mix;
  for (const BlockMadds& b : swin) s += b.mix;
  return s;
}

std::uint64_t MaddReport::total() const {
  std::uint64_t s = embed + final_blocks.total() + heads;
  for (const BlockMadds& b : swin) s += b.total();
  return s;
}

MaddReport count_madds(const InterpreterConfig& config) {
  config.validate();
  MaddReport r;
  const std::vector<std::size_t> counts = config.token_counts();
  const std::vector<std::size_t> widths = config.widths();
  r.embed = static_cast<std::uint64_t>(config.n) * config.d_in * config.d_model;
  for (std::size_t i = 0; i < config.layers.size(); ++i)
    r.swin.push_back(swin_block_madds(config.layers[i], counts[i], widths[i]));
  const std::uint64_t m = config.m, d = widths.back();
  for (std::size_t i = 0; i < config.final_blocks; ++i) {
    r.final_blocks.projection += 4 * m * d * d + (config.final_ff ? 4 * m * d * d : 0);
    r.final_blocks.score += m * m * d;
    r.final_blocks.mix += m * m * d;
  }
  r.heads = m * d * config.tracks;
  return r;
}

void save_checkpoint(const std::string& path, const InterpreterConfig& config, const InterpreterParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open checkpoint for writing");
  ConfigTree tree;
  model_config_to_tree(config, tree);
  BinaryWriter w(out);
  w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u64(kCheckpointVersion);
  w.string(config_to_text(tree));
  InterpreterParams copy = params;
  std::uint64_t count = 0;
  for_each_tensor(copy, [&](const std::string&, Tensor<double>&) { ++count; });
  w.u64(count);
  for_each_tensor(copy, [&](const std::string& name, Tensor<double>& t) {
    w.string(name);
    w.u64(t.rank());
    for (std::size_t extent : t.shape()) w.u64(extent);
    for (double v : t.data()) w.f64(v);
  });
  out.flush();
  if (!out) throw IoError(path, "write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open checkpoint");
  BinaryReader r(in);
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw FormatError(FormatErrorCode::BadMagic, path + ": not a checkpoint file");
  const std::uint64_t version = r.u64();
  if (version != kCheckpointVersion)
    throw FormatError(FormatErrorCode::VersionMismatch, path + ": unsupported checkpoint version " + std::to_string(version));

  Checkpoint ck;
  ck.config = model_config_from_tree(parse_config_text(r.string()));
  ck.params = build(ck.config, 0);
  const std::uint64_t count = r.u64();
  std::uint64_t seen = 0;
  for_each_tensor(ck.params, [&](const std::string& name, Tensor<double>& t) {
    if (seen++ >= count) throw FormatError(FormatErrorCode::Inconsistent, path + ": missing tensor " + name);
    const std::string stored = r.string();
    if (stored != name)
      throw FormatError(FormatErrorCode::Inconsistent, path + ": expected tensor " + name + ", found " + stored);
    const std::uint64_t rank = r.u64();
    if (rank != t.rank()) throw FormatError(FormatErrorCode::Inconsistent, path + ": tensor " + name + " has wrong rank");
    for (std::size_t i = 0; i < rank; ++i)
      if (r.u64() != t.dim(i))
        throw FormatError(FormatErrorCode::Inconsistent, path + ": tensor " + name + " has wrong shape");
    for (double& v : t.data()) v = r.f64();
  });
  if (seen != count) throw FormatError(FormatErrorCode::Inconsistent, path + ": unexpected extra tensors");
  return ck;
}

#define GI_INSTANTIATE_MODEL(Real)                                                                               \
  template InterpreterWeights<Var<Real>> bind(Tape<Real>&, const InterpreterParams&, bool);                     \
  template Var<Real> crop(Var<Real>, std::size_t);                                                              \
  template Var<Real> final_transformer_block(Var<Real>, const MhaWeights<Var<Real>>&);                          \
  template ModelOutput<Real> forward(const InterpreterWeights<Var<Real>>&, Var<Real>, const InterpreterConfig&, \
                                     bool);                                                                     \
  template Tensor<double> predict<Real>(const InterpreterParams&, const InterpreterConfig&, const Tensor<double>&);

GI_INSTANTIATE_MODEL(float)
GI_INSTANTIATE_MODEL(double)

}  // namespace gi
