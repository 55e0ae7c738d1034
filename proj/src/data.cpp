// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0

#include "gi/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "gi/binary_io.hpp"
#include "gi/rng.hpp"

namespace gi {
namespace {

constexpr char kBases[4] = {'A', 'C', 'G', 'T'};
constexpr std::uint64_t kDatasetVersion = 1;

std::vector<std::size_t> find_occurrences(const std::string& sequence, const std::string& motif) {
  std::vector<std::size_t> hits;
  if (motif.empty() || motif.size() > sequence.size()) return hits;
  for (std::size_t pos = sequence.find(motif); pos != std::string::npos; pos = sequence.find(motif, pos + 1))
    hits.push_back(pos);
  return hits;
}

std::size_t distance(std::size_t a, std::size_t b) { return a > b ? a - b : b - a; }

void check_track_vector(const std::vector<double>& v, std::size_t tracks, const std::string& what) {
  if (v.size() != tracks)
    throw ConfigError(what + " has " + std::to_string(v.size()) + " per-track values for " + std::to_string(tracks) +
                      " tracks");
  for (double x : v)
    if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError(what + " values must be finite and non-negative");
}

std::string read_line(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError(FormatErrorCode::TruncatedPayload, "dataset header ends early");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::uint64_t header_value(std::istream& in, const std::string& key) {
  const std::string line = read_line(in);
  std::istringstream fields(line);
  std::string name;
  std::uint64_t value = 0;
  if (!(fields >> name >> value) || name != key)
    throw FormatError(FormatErrorCode::Inconsistent, "dataset header: expected '" + key + " <value>', got '" + line + "'");
  return value;
}

}  // namespace

Tensor<double> one_hot_encode(std::string_view sequence) {
  if (sequence.empty()) throw ParseError(0, "empty sequence");
  Tensor<double> out({sequence.size(), 4});
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    switch (std::toupper(static_cast<unsigned char>(sequence[i]))) {
      case 'A': out(i, 0) = 1.0; break;
      case 'C': out(i, 1) = 1.0; break;
      case 'G': out(i, 2) = 1.0; break;
      case 'T': out(i, 3) = 1.0; break;
      case 'N':
        for (std::size_t j = 0; j < 4; ++j) out(i, j) = 0.25;
        break;
      default:
        throw ParseError(i, std::string("invalid nucleotide '") + sequence[i] + "'");
    }
  }
  return out;
}

std::string decode_one_hot(const Tensor<double>& onehot) {
  if (onehot.rank() != 2 || onehot.cols() != 4) throw DimensionError("decode_one_hot: expected n x 4 input");
  std::string out(onehot.rows(), 'N');
  for (std::size_t i = 0; i < onehot.rows(); ++i)
    for (std::size_t j = 0; j < 4; ++j)
      if (onehot(i, j) == 1.0) out[i] = kBases[j];
  return out;
}

std::vector<double> bin_reads(std::span<const double> per_bp, std::size_t bin_width, std::size_t m) {
  if (bin_width == 0 || m == 0) throw ContractError("bin_reads: bin width and bin count must be positive");
  if (m * bin_width > per_bp.size())
    throw ContractError("bin_reads: " + std::to_string(m) + " bins of " + std::to_string(bin_width) +
                        " bp exceed sequence length " + std::to_string(per_bp.size()));
  const std::size_t offset = (per_bp.size() - m * bin_width) / 2;
  std::vector<double> bins(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    double total = 0.0;
    for (std::size_t p = 0; p < bin_width; ++p) {
      const double v = per_bp[offset + j * bin_width + p];
      if (v < 0.0) throw ContractError("bin_reads: per-bp values must be non-negative");
      total += v;
    }
    bins[j] = total / static_cast<double>(bin_width);
  }
  return bins;
}

void SyntheticTaskSpec::validate() const {
  if (n == 0 || m == 0 || tracks == 0 || bin_width == 0) throw ConfigError("task: n, m, tracks, bin_width must be positive");
  if (m * bin_width > n)
    throw ConfigError("task: " + std::to_string(m) + " bins of " + std::to_string(bin_width) + " bp exceed n = " +
                      std::to_string(n));
  if (!(noise >= 0.0)) throw ConfigError("task: noise must be non-negative");
  for (std::size_t i = 0; i < motifs.size(); ++i) {
    const std::string& s = motifs[i].sequence;
    if (s.empty()) throw ConfigError("task: motif " + std::to_string(i) + " is empty");
    for (char c : s)
      if (c != 'A' && c != 'C' && c != 'G' && c != 'T')
        throw ConfigError("task: motif " + std::to_string(i) + " contains '" + c + "'");
    if (s.size() > n)
      throw ContractError("task: motif " + std::to_string(i) + " (" + std::to_string(s.size()) +
                          " bp) is longer than the sequence (" + std::to_string(n) + " bp)");
    check_track_vector(motifs[i].weights, tracks, "task: motif " + std::to_string(i));
  }
  bool long_range = pairs.empty();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].a >= motifs.size() || pairs[i].b >= motifs.size())
      throw ConfigError("task: pair " + std::to_string(i) + " refers to a missing motif");
    check_track_vector(pairs[i].bonus, tracks, "task: pair " + std::to_string(i));
    long_range = long_range || pairs[i].min_distance > bin_width;
  }
  if (!long_range) throw ConfigError("task: at least one pair needs min_distance above the bin width");
  if (!track_groups.empty() && track_groups.size() != tracks)
    throw ConfigError("task: track_groups has " + std::to_string(track_groups.size()) + " labels for " +
                      std::to_string(tracks) + " tracks");
}

SyntheticTaskSpec default_task() {
  SyntheticTaskSpec spec;
  spec.motifs = {
      {"AAAAAAAA", {8.0, 0.0}},
      {"TTTTTTTT", {4.0, 0.0}},
      {"GGGGGGGG", {0.0, 0.0}},
      {"CCCCCCCC", {0.0, 0.0}},
  };
  spec.pairs = {{2, 3, 128, {0.0, 8.0}}};
  spec.track_groups = {"DNase", "ChIP"};
  return spec;
}

SyntheticTaskSpec task_from_tree(const ConfigTree& tree) {
  SyntheticTaskSpec spec;
  spec.n = get_size(tree, "task.n", spec.n);
  spec.m = get_size(tree, "task.m", spec.m);
  spec.tracks = get_size(tree, "task.tracks", spec.tracks);
  spec.bin_width = get_size(tree, "task.bin_width", spec.bin_width);
  spec.noise = get_double(tree, "task.noise", spec.noise);
  spec.max_plants = get_size(tree, "task.max_plants", spec.max_plants);
  spec.track_groups = get_list(tree, "task.track_groups");
  for (std::size_t i = 0;; ++i) {
    const std::string section = "motif_" + std::to_string(i);
    if (!tree.get_child_optional(section)) break;
    Motif motif;
    motif.sequence = get_string(tree, section + ".sequence", "");
    std::transform(motif.sequence.begin(), motif.sequence.end(), motif.sequence.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    motif.weights = get_double_list(tree, section + ".weights");
    spec.motifs.push_back(std::move(motif));
  }
  for (std::size_t i = 0;; ++i) {
    const std::string section = "pair_" + std::to_string(i);
    if (!tree.get_child_optional(section)) break;
    Interaction pair;
    pair.a = get_size(tree, section + ".a", 0);
    pair.b = get_size(tree, section + ".b", 0);
    pair.min_distance = get_size(tree, section + ".min_distance", 0);
    pair.bonus = get_double_list(tree, section + ".bonus");
    spec.pairs.push_back(std::move(pair));
  }
  spec.validate();
  return spec;
}

void task_to_tree(const SyntheticTaskSpec& spec, ConfigTree& tree) {
  tree.put("task.n", spec.n);
  tree.put("task.m", spec.m);
  tree.put("task.tracks", spec.tracks);
  tree.put("task.bin_width", spec.bin_width);
  tree.put("task.noise", format_double(spec.noise));
  tree.put("task.max_plants", spec.max_plants);
  if (!spec.track_groups.empty()) tree.put("task.track_groups", join(spec.track_groups));
  for (std::size_t i = 0; i < spec.motifs.size(); ++i) {
    const std::string section = "motif_" + std::to_string(i);
    tree.put(section + ".sequence", spec.motifs[i].sequence);
    tree.put(section + ".weights", join(spec.motifs[i].weights));
  }
  for (std::size_t i = 0; i < spec.pairs.size(); ++i) {
    const std::string section = "pair_" + std::to_string(i);
    tree.put(section + ".a", spec.pairs[i].a);
    tree.put(section + ".b", spec.pairs[i].b);
    tree.put(section + ".min_distance", spec.pairs[i].min_distance);
    tree.put(section + ".bonus", join(spec.pairs[i].bonus));
  }
}

Tensor<double> per_bp_rate(const std::string& sequence, const SyntheticTaskSpec& spec) {
  const std::size_t n = sequence.size(), tracks = spec.tracks;
  Tensor<double> rate({n, tracks});
  std::vector<std::vector<std::size_t>> hits;
  for (const Motif& motif : spec.motifs) hits.push_back(find_occurrences(sequence, motif.sequence));

  auto add_cover = [&](std::size_t start, std::size_t len, const std::vector<double>& per_track) {
    for (std::size_t p = start; p < start + len; ++p)
      for (std::size_t t = 0; t < tracks; ++t) rate(p, t) += per_track[t];
  };
  for (std::size_t i = 0; i < spec.motifs.size(); ++i)
    for (std::size_t start : hits[i]) add_cover(start, spec.motifs[i].sequence.size(), spec.motifs[i].weights);

  for (const Interaction& pair : spec.pairs) {
    // (motif, start) of every occurrence with a partner far enough away.
    std::vector<std::pair<std::size_t, std::size_t>> earners;
    auto collect = [&](std::size_t self, std::size_t partner) {
      for (std::size_t p : hits[self]) {
        const bool paired = std::any_of(hits[partner].begin(), hits[partner].end(),
                                        [&](std::size_t q) { return distance(p, q) > pair.min_distance; });
        if (paired) earners.emplace_back(self, p);
      }
    };
    collect(pair.a, pair.b);
    collect(pair.b, pair.a);
    std::sort(earners.begin(), earners.end());
    earners.erase(std::unique(earners.begin(), earners.end()), earners.end());
    for (const auto& [motif, start] : earners) add_cover(start, spec.motifs[motif].sequence.size(), pair.bonus);
  }
  return rate;
}

Tensor<double> synthetic_targets(const std::string& sequence, const SyntheticTaskSpec& spec) {
  const Tensor<double> rate = per_bp_rate(sequence, spec);
  Tensor<double> targets({spec.m, spec.tracks});
  std::vector<double> column(sequence.size());
  for (std::size_t t = 0; t < spec.tracks; ++t) {
    for (std::size_t p = 0; p < sequence.size(); ++p) column[p] = rate(p, t);
    const std::vector<double> bins = bin_reads(column, spec.bin_width, spec.m);
    for (std::size_t j = 0; j < spec.m; ++j) targets(j, t) = bins[j];
  }
  return targets;
}

AssayDataset AssayDataset::subset(const std::vector<std::size_t>& indices) const {
  AssayDataset out;
  out.n = n;
  out.m = m;
  out.tracks = tracks;
  out.bin_width = bin_width;
  out.track_groups = track_groups;
  for (std::size_t i : indices) {
    out.ids.push_back(ids.at(i));
    out.inputs.push_back(inputs.at(i));
    out.targets.push_back(targets.at(i));
  }
  return out;
}

void AssayDataset::validate() const {
  if (track_groups.size() != tracks)
    throw ContractError("dataset has " + std::to_string(track_groups.size()) + " group labels for " +
                        std::to_string(tracks) + " tracks");
  if (ids.size() != inputs.size() || targets.size() != inputs.size())
    throw ContractError("dataset ids, inputs and targets differ in count");
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].shape() != Shape{n, 4})
      throw ContractError("record " + ids[i] + " input is " + shape_string(inputs[i].shape()));
    if (targets[i].shape() != Shape{m, tracks})
      throw ContractError("record " + ids[i] + " targets are " + shape_string(targets[i].shape()));
  }
}

AssayDataset generate_synthetic(const SyntheticTaskSpec& spec, std::size_t count, std::uint64_t seed) {
  spec.validate();
  AssayDataset ds;
  ds.n = spec.n;
  ds.m = spec.m;
  ds.tracks = spec.tracks;
  ds.bin_width = spec.bin_width;
  ds.track_groups = spec.track_groups;
  if (ds.track_groups.empty()) ds.track_groups.assign(spec.tracks, "default");

  const Rng root(seed);
  for (std::size_t r = 0; r < count; ++r) {
    Rng rng = root.fork(r);
    std::string sequence(spec.n, 'A');
    for (char& c : sequence) c = kBases[rng.below(4)];
    for (const Motif& motif : spec.motifs) {
      const std::size_t plants = rng.below(spec.max_plants + 1);
      for (std::size_t k = 0; k < plants; ++k) {
        const std::size_t pos = rng.below(spec.n - motif.sequence.size() + 1);
        sequence.replace(pos, motif.sequence.size(), motif.sequence);
      }
    }
    Tensor<double> targets = synthetic_targets(sequence, spec);
    if (spec.noise > 0.0)
      for (double& v : targets.data()) v = spec.noise * static_cast<double>(rng.poisson(v / spec.noise));

    char id[32];
    std::snprintf(id, sizeof(id), "syn%06zu", r);
    ds.ids.emplace_back(id);
    ds.inputs.push_back(one_hot_encode(sequence));
    ds.targets.push_back(std::move(targets));
  }
  return ds;
}

void save_dataset(const std::string& path, const AssayDataset& ds) {
  ds.validate();
  for (const std::string& id : ds.ids)
    if (id.empty() || id.find_first_of("\n\r") != std::string::npos)
      throw ContractError("record id '" + id + "' cannot be stored in the container header");

  std::ostringstream payload;
  BinaryWriter w(payload);
  w.u64(ds.n);
  w.u64(ds.m);
  w.u64(ds.tracks);
  w.u64(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    w.matrix(ds.inputs[i]);
    w.matrix(ds.targets[i]);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open dataset for writing");
  char checksum[17];
  std::snprintf(checksum, sizeof(checksum), "%016llx", static_cast<unsigned long long>(w.checksum()));
  out << "GIDS " << kDatasetVersion << "\n"
      << "n " << ds.n << "\n"
      << "m " << ds.m << "\n"
      << "tracks " << ds.tracks << "\n"
      << "bin_width " << ds.bin_width << "\n"
      << "count " << ds.size() << "\n"
      << "groups " << join(ds.track_groups) << "\n"
      << "checksum " << checksum << "\n"
      << "ids\n";
  for (const std::string& id : ds.ids) out << id << "\n";
  out << "end\n";
  const std::string bytes = payload.str();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError(path, "write failed");
}

AssayDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open dataset");
  try {
    std::string magic_line;
    if (!std::getline(in, magic_line)) throw FormatError(FormatErrorCode::BadMagic, "empty file");
    std::istringstream magic_fields(magic_line);
    std::string magic;
    std::uint64_t version = 0;
    magic_fields >> magic >> version;
    if (magic != "GIDS") throw FormatError(FormatErrorCode::BadMagic, "not a dataset container");
    if (version != kDatasetVersion)
      throw FormatError(FormatErrorCode::VersionMismatch, "unsupported dataset version " + std::to_string(version));

    AssayDataset ds;
    ds.n = header_value(in, "n");
    ds.m = header_value(in, "m");
    ds.tracks = header_value(in, "tracks");
    ds.bin_width = header_value(in, "bin_width");
    const std::uint64_t count = header_value(in, "count");
    {
      std::istringstream fields(read_line(in));
      std::string key, label;
      fields >> key;
      if (key != "groups") throw FormatError(FormatErrorCode::Inconsistent, "dataset header: missing groups line");
      while (fields >> label) ds.track_groups.push_back(label);
    }
    if (ds.track_groups.size() != ds.tracks)
      throw FormatError(FormatErrorCode::Inconsistent, "dataset header lists " + std::to_string(ds.track_groups.size()) +
                                                           " groups for " + std::to_string(ds.tracks) + " tracks");
    std::uint64_t checksum = 0;
    {
      std::istringstream fields(read_line(in));
      std::string key;
      fields >> key >> std::hex >> checksum;
      if (key != "checksum") throw FormatError(FormatErrorCode::Inconsistent, "dataset header: missing checksum line");
    }
    if (read_line(in) != "ids") throw FormatError(FormatErrorCode::Inconsistent, "dataset header: missing ids line");
    for (std::uint64_t i = 0; i < count; ++i) ds.ids.push_back(read_line(in));
    if (read_line(in) != "end") throw FormatError(FormatErrorCode::Inconsistent, "dataset header: missing end line");

    BinaryReader r(in);
    const std::uint64_t pn = r.u64(), pm = r.u64(), pt = r.u64(), pc = r.u64();
    if (pn != ds.n || pm != ds.m || pt != ds.tracks || pc != count)
      throw FormatError(FormatErrorCode::Inconsistent,
                        "payload dimensions n=" + std::to_string(pn) + " m=" + std::to_string(pm) + " T=" +
                            std::to_string(pt) + " count=" + std::to_string(pc) + " disagree with the header");
    for (std::uint64_t i = 0; i < count; ++i) {
      Tensor<double> x = r.matrix();
      Tensor<double> y = r.matrix();
      if (x.shape() != Shape{ds.n, 4} || y.shape() != Shape{ds.m, ds.tracks})
        throw FormatError(FormatErrorCode::Inconsistent, "record " + std::to_string(i) + " matrices " +
                                                             shape_string(x.shape()) + "/" + shape_string(y.shape()) +
                                                             " disagree with the header");
      ds.inputs.push_back(std::move(x));
      ds.targets.push_back(std::move(y));
    }
    if (!r.at_end()) throw FormatError(FormatErrorCode::Inconsistent, "trailing bytes after payload");
    if (r.checksum() != checksum) throw FormatError(FormatErrorCode::ChecksumMismatch, "payload checksum mismatch");
    return ds;
  } catch (const FormatError& e) {
    throw FormatError(e.code(), path + ": " + e.what());
  }
}

DatasetSplit split_dataset(const AssayDataset& ds, const std::array<double, 3>& fractions, std::uint64_t seed) {
  for (double f : fractions)
    if (!(f >= 0.0)) throw ConfigError("split fractions must be non-negative");
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions sum to " + format_double(total) + ", not 1");

  const std::size_t count = ds.size();
  const std::size_t blocks = (count + kSplitBlock - 1) / kSplitBlock;
  std::vector<std::size_t> order(blocks);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = blocks; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  const auto train_target = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(count)));
  const auto val_target = static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(count)));
  std::array<std::vector<std::size_t>, 3> members;
  std::size_t assigned = 0;
  for (std::size_t block : order) {
    std::size_t which = 2;
    if (assigned < train_target)
      which = 0;
    else if (assigned < train_target + val_target)
      which = 1;
    const std::size_t begin = block * kSplitBlock, end = std::min(count, begin + kSplitBlock);
    for (std::size_t i = begin; i < end; ++i) members[which].push_back(i);
    assigned += end - begin;
  }
  static constexpr const char* kNames[3] = {"train", "val", "test"};
  for (std::size_t s = 0; s < 3; ++s) {
    if (fractions[s] > 0.0 && members[s].empty() && count > 0)
      throw ConfigError(std::string(kNames[s]) + " split is empty for fraction " + format_double(fractions[s]));
    std::sort(members[s].begin(), members[s].end());
  }
  return {ds.subset(members[0]), ds.subset(members[1]), ds.subset(members[2])};
}

std::vector<std::pair<std::string, std::string>> read_sequences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open sequence file");
  std::vector<std::pair<std::string, std::string>> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ContractError(path + ":" + std::to_string(line_no) + ": expected 'id<TAB>sequence'");
    records.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return records;
}

AssayDataset dataset_from_text(const std::string& sequence_path, const std::string& targets_csv, std::size_t m,
                               std::size_t bin_width, const std::vector<std::string>& track_groups) {
  const auto records = read_sequences(sequence_path);
  if (records.empty()) throw ContractError(sequence_path + ": no records");
  AssayDataset ds;
  ds.n = records.front().second.size();
  ds.m = m;
  ds.tracks = track_groups.size();
  ds.bin_width = bin_width;
  ds.track_groups = track_groups;
  if (ds.tracks == 0) throw ConfigError("at least one track group label is required");
  if (m * bin_width > ds.n) throw ContractError("bins exceed the sequence length");

  std::map<std::string, std::size_t> index;
  for (const auto& [id, seq] : records) {
    if (seq.size() != ds.n)
      throw ContractError("record " + id + " has length " + std::to_string(seq.size()) + ", expected " +
                          std::to_string(ds.n));
    if (!index.emplace(id, ds.ids.size()).second) throw ContractError("duplicate record id " + id);
    ds.ids.push_back(id);
    ds.inputs.push_back(one_hot_encode(seq));
    ds.targets.emplace_back(Shape{m, ds.tracks});
  }

  std::ifstream in(targets_csv);
  if (!in) throw IoError(targets_csv, "cannot open targets CSV");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string id, track_s, bin_s, value_s;
    std::getline(fields, id, ',');
    std::getline(fields, track_s, ',');
    std::getline(fields, bin_s, ',');
    std::getline(fields, value_s, ',');
    if (line_no == 1 && id == "record_id") continue;
    try {
      const std::size_t track = std::stoul(track_s), bin = std::stoul(bin_s);
      const double value = std::stod(value_s);
      const auto it = index.find(id);
      if (it == index.end()) throw ContractError("unknown record id " + id);
      if (track >= ds.tracks || bin >= m) throw ContractError("track/bin out of range");
      if (!(value >= 0.0)) throw ContractError("target values must be non-negative");
      ds.targets[it->second](bin, track) = value;
    } catch (const std::logic_error& e) {
      throw ContractError(targets_csv + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ds;
}

}  // namespace gi
