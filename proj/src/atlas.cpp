// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0

#include "gi/atlas.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gi/binary_io.hpp"

namespace fs = std::filesystem;

namespace gi {
namespace {

constexpr char kMagic[8] = {'G', 'I', 'A', 'T', 'T', 'N', '0', '1'};
constexpr int kAtlasVersion = 1;
constexpr std::size_t kMargin = 56;  // room for tick labels
constexpr std::size_t kGap = 12;

const AtlasLayer& find_layer(const AttentionAtlas& atlas, std::size_t layer) {
  for (const AtlasLayer& l : atlas.layers)
    if (l.layer == layer) return l;
  throw ContractError("atlas has no layer " + std::to_string(layer) + " (layers 1.." +
                      std::to_string(atlas.layers.size()) + ")");
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
  out.flush();
  if (!out) throw IoError(path.string(), "write failed");
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Cells of one matrix with their top-left corner at (x0, y0).
void emit_cells(std::ostream& svg, const Tensor<double>& weights, const HeatmapStyle& style, std::size_t x0,
                std::size_t y0) {
  const Tensor<double> level = heatmap_intensity(weights, style.norm);
  const std::size_t c = style.cell_px;
  for (std::size_t i = 0; i < level.rows(); ++i)
    for (std::size_t j = 0; j < level.cols(); ++j) {
      const double v = level(i, j);
      svg << "<rect x=\"" << x0 + j * c << "\" y=\"" << y0 + i * c << "\" width=\"" << c << "\" height=\"" << c
          << "\" fill=\"" << ramp_color(style, v) << "\" data-row=\"" << i << "\" data-col=\"" << j
          << "\" data-level=\"" << std::lround(v * 255.0) << "\"/>\n";
    }
}

void emit_ticks(std::ostream& svg, const HeatmapAxis& axis, std::size_t cell, std::size_t x0, std::size_t y0) {
  const std::size_t len = axis.token_bp.size();
  const std::size_t step = std::max<std::size_t>(1, len / 8);
  for (std::size_t i = 0; i < len; i += step) {
    const std::size_t mid = i * cell + cell / 2;
    svg << "<text x=\"" << x0 - 4 << "\" y=\"" << y0 + mid + 3 << "\" text-anchor=\"end\">" << axis.token_bp[i]
        << "</text>\n";
    svg << "<text x=\"" << x0 + mid << "\" y=\"" << y0 - 4 << "\" text-anchor=\"middle\">" << axis.token_bp[i]
        << "</text>\n";
  }
}

std::string svg_open(std::size_t width, std::size_t height, const HeatmapStyle& style) {
  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width << "\" height=\"" << height
    << "\" data-normalization=\"" << norm_name(style.norm) << "\" data-ramp-low=\"" << ramp_color(style, 0.0)
    << "\" data-ramp-high=\"" << ramp_color(style, 1.0) << "\" font-family=\"sans-serif\" font-size=\"9\">\n";
  return s.str();
}

}  // namespace

std::string atlas_record_path(const AttentionRecord& record) {
  return "layer_" + std::to_string(record.layer) + "/mha" + std::to_string(record.slot) + "_window" +
         std::to_string(record.window) + ".bin";
}

nlohmann::json atlas_manifest(const AttentionAtlas& atlas) {
  nlohmann::json j;
  j["format"] = "gi-attention-atlas";
  j["version"] = kAtlasVersion;
  j["layer_count"] = atlas.layers.size();
  j["layers"] = nlohmann::json::array();
  for (const AtlasLayer& l : atlas.layers)
    j["layers"].push_back({{"layer", l.layer},
                           {"tokens", l.tokens},
                           {"span_bp", l.span},
                           {"window", l.window},
                           {"shift", l.shift},
                           {"windows", l.windows},
                           {"heads", l.heads}});
  j["records"] = nlohmann::json::array();
  for (const AttentionRecord& r : atlas.records)
    j["records"].push_back({{"layer", r.layer},
                            {"slot", r.slot},
                            {"window", r.window},
                            {"length", r.heads.empty() ? 0 : r.heads.front().rows()},
                            {"heads", r.heads.size()},
                            {"file", atlas_record_path(r)}});
  return j;
}

void export_atlas(const AttentionAtlas& atlas, const std::string& dir) {
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError(dir, "cannot create directory: " + ec.message());
  for (const AtlasLayer& l : atlas.layers) {
    const fs::path sub = root / ("layer_" + std::to_string(l.layer));
    fs::create_directories(sub, ec);
    if (ec) throw IoError(sub.string(), "cannot create directory: " + ec.message());
  }
  for (const AttentionRecord& r : atlas.records) {
    const fs::path path = root / atlas_record_path(r);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    BinaryWriter w(out);
    w.bytes(kMagic, sizeof(kMagic));
    w.u64(r.layer);
    w.u64(r.slot);
    w.u64(r.window);
    w.u64(r.heads.size());
    for (const Tensor<double>& h : r.heads) w.matrix(h);
    const std::uint64_t sum = w.checksum();
    w.u64(sum);
    out.flush();
    if (!out) throw IoError(path.string(), "write failed");
  }
  write_file(root / "manifest.json", atlas_manifest(atlas).dump(2) + "\n");
}

AttentionAtlas load_atlas(const std::string& dir) {
  const fs::path root(dir);
  const fs::path manifest_path = root / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw IoError(manifest_path.string(), "cannot open atlas manifest");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrorCode::Inconsistent, manifest_path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "gi-attention-atlas")
    throw FormatError(FormatErrorCode::BadMagic, manifest_path.string() + ": not an attention atlas manifest");
  if (j.value("version", 0) != kAtlasVersion)
    throw FormatError(FormatErrorCode::VersionMismatch, manifest_path.string() + ": unsupported version");

  AttentionAtlas atlas;
  try {
    for (const auto& l : j.at("layers")) {
      AtlasLayer layer;
      layer.layer = l.at("layer").get<std::size_t>();
      layer.tokens = l.at("tokens").get<std::size_t>();
      layer.span = l.at("span_bp").get<std::size_t>();
      layer.window = l.at("window").get<std::size_t>();
      layer.shift = l.at("shift").get<std::size_t>();
      layer.windows = l.at("windows").get<std::size_t>();
      layer.heads = l.at("heads").get<std::size_t>();
      atlas.layers.push_back(layer);
    }
    for (const auto& e : j.at("records")) {
      const fs::path path = root / e.at("file").get<std::string>();
      std::ifstream rin(path, std::ios::binary);
      if (!rin) throw IoError(path.string(), "cannot open atlas record");
      BinaryReader r(rin);
      char magic[8];
      r.bytes(magic, sizeof(magic));
      if (!std::equal(magic, magic + 8, kMagic))
        throw FormatError(FormatErrorCode::BadMagic, path.string() + ": not an attention record");
      AttentionRecord rec;
      rec.layer = r.u64();
      rec.slot = r.u64();
      rec.window = r.u64();
      const std::uint64_t heads = r.u64();
      if (heads != e.at("heads").get<std::uint64_t>() || rec.layer != e.at("layer").get<std::size_t>() ||
          rec.slot != e.at("slot").get<std::size_t>() || rec.window != e.at("window").get<std::size_t>())
        throw FormatError(FormatErrorCode::Inconsistent, path.string() + ": header disagrees with the manifest");
      for (std::uint64_t h = 0; h < heads; ++h) rec.heads.push_back(r.matrix());
      const std::uint64_t expected = r.checksum();
      if (r.u64() != expected) throw FormatError(FormatErrorCode::ChecksumMismatch, path.string() + ": checksum mismatch");
      atlas.records.push_back(std::move(rec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrorCode::Inconsistent, manifest_path.string() + ": " + e.what());
  }
  return atlas;
}

std::string norm_name(HeatmapNorm norm) { return norm == HeatmapNorm::PerRow ? "per-row" : "global-max"; }

HeatmapNorm parse_norm(const std::string& name) {
  if (name == "per-row") return HeatmapNorm::PerRow;
  if (name == "global-max") return HeatmapNorm::GlobalMax;
  throw ConfigError("unknown heatmap normalisation '" + name + "' (per-row or global-max)");
}

Tensor<double> heatmap_intensity(const Tensor<double>& weights, HeatmapNorm norm) {
  Tensor<double> out = weights;
  double scale = 1.0;
  if (norm == HeatmapNorm::GlobalMax) {
    const double hi = *std::max_element(weights.data().begin(), weights.data().end());
    if (hi > 0.0) scale = 1.0 / hi;
  }
  for (double& v : out.data()) v = std::clamp(v * scale, 0.0, 1.0);
  return out;
}

std::string ramp_color(const HeatmapStyle& style, double intensity) {
  const double v = std::clamp(intensity, 0.0, 1.0);
  char buf[8];
  int rgb[3];
  for (int c = 0; c < 3; ++c)
    rgb[c] = static_cast<int>(std::lround(style.low[c] + (style.high[c] - style.low[c]) * v));
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

HeatmapAxis record_axis(const AtlasLayer& layer, const AttentionRecord& record) {
  HeatmapAxis axis;
  axis.span = layer.span;
  const std::size_t n = layer.tokens;
  const std::size_t len = record.heads.empty() ? 0 : record.heads.front().rows();
  const std::size_t shift = record.slot == 2 ? layer.shift % n : 0;
  for (std::size_t i = 0; i < len; ++i) {
    // Rolled position p holds original token (p − t) mod n.
    const std::size_t p = record.window * layer.window + i;
    axis.token_bp.push_back(((p + n - shift) % n) * layer.span);
  }
  return axis;
}

std::string heatmap_svg(const Tensor<double>& weights, const HeatmapStyle& style, const HeatmapAxis& axis,
                        const std::string& title) {
  if (weights.rank() != 2 || weights.rows() != weights.cols())
    throw DimensionError("heatmap needs a square matrix, got " + shape_string(weights.shape()));
  const std::size_t side = weights.rows() * style.cell_px;
  std::ostringstream svg;
  svg << svg_open(kMargin + side + kGap, kMargin + side + kGap + 14, style);
  svg << "<title>" << escape(title) << "</title>\n";
  svg << "<text x=\"" << kMargin << "\" y=\"12\">" << escape(title) << " (" << axis.span << " bp/token)</text>\n";
  if (axis.token_bp.size() == weights.rows()) emit_ticks(svg, axis, style.cell_px, kMargin, kMargin);
  emit_cells(svg, weights, style, kMargin, kMargin);
  svg << "</svg>\n";
  return svg.str();
}

void render_heatmap(const Tensor<double>& weights, const HeatmapStyle& style, const HeatmapAxis& axis,
                    const std::string& title, const std::string& path) {
  write_file(path, heatmap_svg(weights, style, axis, title));
}

void render_layer_grid(const AttentionAtlas& atlas, std::size_t layer, const HeatmapStyle& style,
                       const std::string& path) {
  const AtlasLayer& geo = find_layer(atlas, layer);
  const std::size_t tile = geo.window * style.cell_px + kMargin;
  const std::size_t rows = 2 * geo.heads, cols = geo.windows;
  std::ostringstream svg;
  svg << svg_open(cols * tile + kGap, rows * tile + 20 + kGap, style);
  svg << "<text x=\"4\" y=\"12\">layer " << layer << ": " << geo.tokens << " tokens, " << geo.span
      << " bp/token, window " << geo.window << "; rows = (mha slot, head), columns = windows</text>\n";
  for (const AttentionRecord& r : atlas.records) {
    if (r.layer != layer) continue;
    const HeatmapAxis axis = record_axis(geo, r);
    for (std::size_t h = 0; h < r.heads.size(); ++h) {
      const std::size_t x0 = r.window * tile + kMargin, y0 = ((r.slot - 1) * geo.heads + h) * tile + 20 + kMargin;
      svg << "<g data-slot=\"" << r.slot << "\" data-window=\"" << r.window << "\" data-head=\"" << h << "\">\n";
      emit_ticks(svg, axis, style.cell_px, x0, y0);
      emit_cells(svg, r.heads[h], style, x0, y0);
      svg << "</g>\n";
    }
  }
  svg << "</svg>\n";
  write_file(path, svg.str());
}

void render_head_panel(const AttentionAtlas& atlas, std::size_t layer, const HeatmapStyle& style,
                       const std::string& path) {
  const AtlasLayer& geo = find_layer(atlas, layer);
  const std::size_t len = std::min(geo.window, geo.tokens);
  const std::size_t tile = len * style.cell_px + kMargin;
  std::ostringstream svg;
  svg << svg_open(geo.heads * tile + kGap, 2 * tile + 20 + kGap, style);
  svg << "<text x=\"4\" y=\"12\">layer " << layer << " heads, mean over windows of " << len << " tokens ("
      << geo.span << " bp/token); rows = mha slot</text>\n";
  HeatmapAxis axis;
  axis.span = geo.span;
  for (std::size_t i = 0; i < len; ++i) axis.token_bp.push_back(i * geo.span);
  for (std::size_t slot = 1; slot <= 2; ++slot)
    for (std::size_t h = 0; h < geo.heads; ++h) {
      Tensor<double> mean({len, len});
      std::size_t count = 0;
      for (const AttentionRecord& r : atlas.records)
        if (r.layer == layer && r.slot == slot && h < r.heads.size() && r.heads[h].rows() == len) {
          for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += r.heads[h][k];
          ++count;
        }
      if (count == 0) continue;
      for (double& v : mean.data()) v /= static_cast<double>(count);
      const std::size_t x0 = h * tile + kMargin, y0 = (slot - 1) * tile + 20 + kMargin;
      svg << "<g data-slot=\"" << slot << "\" data-head=\"" << h << "\" data-windows=\"" << count << "\">\n";
      emit_ticks(svg, axis, style.cell_px, x0, y0);
      emit_cells(svg, mean, style, x0, y0);
      svg << "</g>\n";
    }
  svg << "</svg>\n";
  write_file(path, svg.str());
}

double diagonality_index(const Tensor<double>& weights) {
  if (weights.rank() != 2 || weights.rows() != weights.cols())
    throw DimensionError("diagonality_index needs a square matrix, got " + shape_string(weights.shape()));
  const std::size_t len = weights.rows();
  if (len == 1) return 1.0;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t j = 0; j < len; ++j) {
      const double w = weights(i, j);
      const double dist = static_cast<double>(i > j ? i - j : j - i);
      num += w * (1.0 - dist / static_cast<double>(len - 1));
      den += w;
    }
  return den > 0.0 ? num / den : 1.0;
}

}  // namespace gi
