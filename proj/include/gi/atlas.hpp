// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0
//
// Export, reload and rendering of captured attention maps.
//
// On-disk layout of an exported atlas directory:
//
//   manifest.json
//   layer_<l>/mha<slot>_window<w>.bin
//
// Each .bin file: 8 bytes "GIATTN01", u64 layer, u64 slot, u64 window,
// u64 head count, then one matrix block per head (u64 rows, u64 cols,
// row-major f64, the block layout of the dataset container), then the FNV-1a
// 64 checksum of everything before it as u64. Little-endian throughout.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "gi/model.hpp"

namespace gi {

/// Manifest as JSON: format, version, tokens, per-layer geometry and one
/// entry per record (layer, slot, window, length, heads, file).
nlohmann::json atlas_manifest(const AttentionAtlas& atlas);

/// Relative path of a record's matrix file inside the atlas directory.
std::string atlas_record_path(const AttentionRecord& record);

/// Writes the directory (created if missing). Throws IoError naming the failing path.
void export_atlas(const AttentionAtlas& atlas, const std::string& dir);

/// Reads an exported directory back. Missing files raise IoError, damaged ones FormatError.
AttentionAtlas load_atlas(const std::string& dir);

enum class HeatmapNorm { PerRow, GlobalMax };

/// Two-stop linear ramp from `low` (weight 0) to `high` (full intensity).
///
/// PerRow draws the softmax weights as they are (each row already sums to 1),
/// GlobalMax divides every cell by the largest weight in the matrix.
struct HeatmapStyle {
  std::array<int, 3> low{255, 255, 255};
  std::array<int, 3> high{8, 48, 107};
  std::size_t cell_px = 8;
  HeatmapNorm norm = HeatmapNorm::PerRow;
};

std::string norm_name(HeatmapNorm norm);
HeatmapNorm parse_norm(const std::string& name);

/// Cell intensities in [0, 1] under the style's normalisation.
Tensor<double> heatmap_intensity(const Tensor<double>& weights, HeatmapNorm norm);

/// "#rrggbb" for an intensity in [0, 1].
std::string ramp_color(const HeatmapStyle& style, double intensity);

/// Axis annotation: the bp position each row/column token starts at, and bp per token.
struct HeatmapAxis {
  std::vector<std::size_t> token_bp;
  std::size_t span = 1;
};

/// Token start positions (bp) for one record of the given layer geometry.
HeatmapAxis record_axis(const AtlasLayer& layer, const AttentionRecord& record);

/// SVG 1.1 document for one matrix. Every cell is a <rect> carrying
/// data-row, data-col and data-level (intensity quantised to 0..255).
std::string heatmap_svg(const Tensor<double>& weights, const HeatmapStyle& style, const HeatmapAxis& axis,
                        const std::string& title);

void render_heatmap(const Tensor<double>& weights, const HeatmapStyle& style, const HeatmapAxis& axis,
                    const std::string& title, const std::string& path);

/// One tile per (slot, window, head) of a layer; rows are (slot, head), columns windows.
void render_layer_grid(const AttentionAtlas& atlas, std::size_t layer, const HeatmapStyle& style,
                       const std::string& path);

/// One tile per head of a layer and slot, averaged over the full-length windows.
void render_head_panel(const AttentionAtlas& atlas, std::size_t layer, const HeatmapStyle& style,
                       const std::string& path);

/// Σ w_ij·(1 − |i−j|/(L−1)) / Σ w_ij for a square matrix; 1 when L = 1 or the
/// matrix carries no mass.
double diagonality_index(const Tensor<double>& weights);

}  // namespace gi
