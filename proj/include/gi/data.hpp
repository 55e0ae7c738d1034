// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gi/config.hpp"
#include "gi/tensor.hpp"

namespace gi {

/// One-hot rows in A, C, G, T column order; N maps to 0.25 in every column.
/// Case-insensitive. Other characters raise ParseError with their position.
Tensor<double> one_hot_encode(std::string_view sequence);

/// Inverse of one_hot_encode for rows with a single 1 (N for uniform rows).
std::string decode_one_hot(const Tensor<double>& onehot);

/// Mean of per_bp over m consecutive bins of bin_width, centred in the
/// sequence: the first ⌊(n − m·B)/2⌋ positions are skipped.
std::vector<double> bin_reads(std::span<const double> per_bp, std::size_t bin_width, std::size_t m);

struct Motif {
  std::string sequence;         ///< over A, C, G, T
  std::vector<double> weights;  ///< per-track rate added at every covered position
};

/// Occurrences of motif `a` and `b` further than min_distance apart (start to
/// start) earn `bonus` per track at each of their covered positions. Each
/// occurrence earns a pair's bonus at most once.
struct Interaction {
  std::size_t a = 0;
  std::size_t b = 0;
  std::size_t min_distance = 0;
  std::vector<double> bonus;
};

/// Synthetic stand-in for binned assay data with local and long-range signal.
///
/// Each record is uniform random sequence with every motif planted between 0
/// and max_plants times at uniform positions (later plants overwrite earlier
/// bases). The per-bp rate is computed from all exact motif matches in the
/// final sequence, including accidental ones, then binned with bin_reads.
/// With noise > 0 each bin becomes noise·Poisson(rate/noise).
struct SyntheticTaskSpec {
  std::size_t n = 512;
  std::size_t m = 8;
  std::size_t tracks = 2;
  std::size_t bin_width = 64;
  std::vector<Motif> motifs;
  std::vector<Interaction> pairs;
  double noise = 0.0;
  std::size_t max_plants = 3;
  std::vector<std::string> track_groups;

  void validate() const;
};

/// n=512, B=64, m=8, T=2, up to 3 plants per motif, no noise. Track 0 responds
/// to A8 (weight 8) and T8 (weight 4) locally; track 1 only to a G8/C8 pair more
/// than 128 bp apart (bonus 8). Homopolymer motifs keep the task learnable at
/// desk scale in 1000 steps.
SyntheticTaskSpec default_task();

/// Reads [task], [motif_<i>] and [pair_<i>] sections (i = 0, 1, ... without gaps).
SyntheticTaskSpec task_from_tree(const ConfigTree& tree);
void task_to_tree(const SyntheticTaskSpec& spec, ConfigTree& tree);

/// n × T ground-truth rate of one sequence.
Tensor<double> per_bp_rate(const std::string& sequence, const SyntheticTaskSpec& spec);
/// m × T noise-free targets of one sequence.
Tensor<double> synthetic_targets(const std::string& sequence, const SyntheticTaskSpec& spec);

struct AssayDataset {
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t tracks = 0;
  std::size_t bin_width = 0;
  std::vector<std::string> track_groups;
  std::vector<std::string> ids;
  std::vector<Tensor<double>> inputs;   ///< n × 4 one-hot
  std::vector<Tensor<double>> targets;  ///< m × T, non-negative

  std::size_t size() const { return inputs.size(); }
  AssayDataset subset(const std::vector<std::size_t>& indices) const;
  /// Throws ContractError on any shape or label inconsistency.
  void validate() const;
  friend bool operator==(const AssayDataset&, const AssayDataset&) = default;
};

/// Records are reproducible from (spec, seed); record i uses stream fork(i).
AssayDataset generate_synthetic(const SyntheticTaskSpec& spec, std::size_t count, std::uint64_t seed);

/// Container layout, text header then binary payload:
///
///   GIDS 1
///   n <n>
///   m <m>
///   tracks <T>
///   bin_width <B>
///   count <records>
///   groups <label> ... (T labels)
///   checksum <16 hex digits, FNV-1a 64 of the payload>
///   ids
///   <one id per line, count lines>
///   end
///   payload: u64 n, u64 m, u64 T, u64 count, then per record a matrix block
///            n×4 (one-hot) followed by a matrix block m×T (targets).
///
/// Errors: FormatError with BadMagic, VersionMismatch, TruncatedPayload,
/// ChecksumMismatch or Inconsistent (header and payload disagree).
void save_dataset(const std::string& path, const AssayDataset& ds);
AssayDataset load_dataset(const std::string& path);

struct DatasetSplit {
  AssayDataset train, val, test;
};

/// Seeded shuffle of 16-record blocks; blocks fill train, then val, then test
/// until each reaches round(fraction·N). Record order inside a split is preserved.
DatasetSplit split_dataset(const AssayDataset& ds, const std::array<double, 3>& fractions, std::uint64_t seed);

inline constexpr std::size_t kSplitBlock = 16;

/// Plain-text records: one "id<TAB>sequence" per line. Blank lines are skipped.
std::vector<std::pair<std::string, std::string>> read_sequences(const std::string& path);

/// Builds a dataset from sequence text plus a CSV of record_id,track,bin,value
/// (optional header line). Bins not listed stay zero.
AssayDataset dataset_from_text(const std::string& sequence_path, const std::string& targets_csv, std::size_t m,
                               std::size_t bin_width, const std::vector<std::string>& track_groups);

}  // namespace gi
