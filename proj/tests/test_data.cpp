// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gi/data.hpp"
#include "label_oracle.hpp"
#include "test_util.hpp"

using namespace gi;

namespace {

template <class Fn>
FormatErrorCode format_code(Fn&& fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    return e.code();
  }
  FAIL("no FormatError raised");
  return FormatErrorCode::BadMagic;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
}

SyntheticTaskSpec single_motif(std::size_t n, std::size_t bin_width, std::size_t m) {
  SyntheticTaskSpec spec;
  spec.n = n;
  spec.bin_width = bin_width;
  spec.m = m;
  spec.tracks = 1;
  spec.motifs = {{"ACGTAC", {3.0}}};
  return spec;
}

AssayDataset tiny_dataset(std::size_t count) {
  AssayDataset ds;
  ds.n = 1;
  ds.m = 1;
  ds.tracks = 1;
  ds.bin_width = 1;
  ds.track_groups = {"DNase"};
  for (std::size_t i = 0; i < count; ++i) {
    ds.ids.push_back("r" + std::to_string(i));
    ds.inputs.push_back(one_hot_encode("A"));
    ds.targets.push_back(Tensor<double>({1, 1}, static_cast<double>(i)));
  }
  return ds;
}

}  // namespace

TEST_CASE("one-hot encoding") {
  const Tensor<double> x = one_hot_encode("ACGT");
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(x(i, j) == (i == j ? 1.0 : 0.0));
  const Tensor<double> n = one_hot_encode("n");
  for (std::size_t j = 0; j < 4; ++j) CHECK(n(0, j) == 0.25);
  CHECK(decode_one_hot(one_hot_encode("acgtN")) == "ACGTN");
  try {
    one_hot_encode("ACGX");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.position() == 3);
  }
  Rng rng(4);
  const Tensor<double> r = test::random_onehot(50, rng);
  for (std::size_t i = 0; i < 50; ++i) CHECK(r(i, 0) + r(i, 1) + r(i, 2) + r(i, 3) == 1.0);
}

TEST_CASE("read binning") {
  const std::vector<double> ramp{0, 2, 4, 6, 8, 10, 12, 14};
  CHECK(bin_reads(ramp, 2, 4) == std::vector<double>{1, 5, 9, 13});
  const std::vector<double> constant(12, 2.5);
  CHECK(bin_reads(constant, 3, 4) == std::vector<double>(4, 2.5));
  // n = 10: positions 1..8 are covered.
  std::vector<double> marks(10, 0.0);
  marks[0] = 100.0;
  marks[9] = 100.0;
  marks[1] = 2.0;
  marks[8] = 4.0;
  CHECK(bin_reads(marks, 2, 4) == std::vector<double>{1, 0, 0, 2});
  CHECK_THROWS_AS(bin_reads(marks, 3, 4), ContractError);

  // Mean preserving on the covered span.
  Rng rng(3);
  std::vector<double> v(37);
  for (double& x : v) x = static_cast<double>(rng.below(100));
  const auto bins = bin_reads(v, 5, 7);
  const double span_mean = std::accumulate(v.begin() + 1, v.begin() + 36, 0.0) / 35.0;
  CHECK(std::accumulate(bins.begin(), bins.end(), 0.0) / 7.0 == doctest::Approx(span_mean).epsilon(1e-14));
}

TEST_CASE("single motif inside one bin") {
  const SyntheticTaskSpec spec = single_motif(64, 16, 4);
  std::string seq(64, 'T');
  seq.replace(20, 6, "ACGTAC");
  const Tensor<double> y = synthetic_targets(seq, spec);
  CHECK(y(1, 0) == 3.0 * 6.0 / 16.0);
  CHECK(y(0, 0) == 0.0);
  CHECK(y(2, 0) == 0.0);
}

TEST_CASE("interaction bonus depends on distance") {
  SyntheticTaskSpec spec;
  spec.n = 128;
  spec.bin_width = 16;
  spec.m = 8;
  spec.tracks = 2;
  spec.motifs = {{"GATAAG", {0, 0}}, {"CCAATC", {0, 0}}};
  spec.pairs = {{0, 1, 40, {0, 2}}};
  std::string far(128, 'T'), near(128, 'T');
  far.replace(0, 6, "GATAAG");
  far.replace(64, 6, "CCAATC");
  near.replace(0, 6, "GATAAG");
  near.replace(32, 6, "CCAATC");
  const Tensor<double> yf = synthetic_targets(far, spec), yn = synthetic_targets(near, spec);
  CHECK(yf(0, 1) == 2.0 * 6.0 / 16.0);
  CHECK(yf(4, 1) == 2.0 * 6.0 / 16.0);
  for (double v : yn.data()) CHECK(v == 0.0);
}

TEST_CASE("zero motifs give zero targets") {
  SyntheticTaskSpec spec = single_motif(64, 16, 4);
  spec.motifs.clear();
  for (const Tensor<double>& y : generate_synthetic(spec, 5, 1).targets)
    for (double v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("task validation") {
  SyntheticTaskSpec spec = default_task();
  spec.validate();
  spec.pairs[0].min_distance = spec.bin_width;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  SyntheticTaskSpec longer = single_motif(4, 1, 4);
  CHECK_THROWS_AS(generate_synthetic(longer, 1, 0), ContractError);
  SyntheticTaskSpec bad = default_task();
  bad.motifs[0].sequence = "TANA";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("task config round trip") {
  const SyntheticTaskSpec spec = default_task();
  ConfigTree tree;
  task_to_tree(spec, tree);
  const SyntheticTaskSpec back = task_from_tree(parse_config_text(config_to_text(tree)));
  CHECK(back.motifs.size() == spec.motifs.size());
  CHECK(back.pairs.size() == spec.pairs.size());
  CHECK(generate_synthetic(back, 4, 9) == generate_synthetic(spec, 4, 9));
}

TEST_CASE("shipped task file is the built-in default") {
  const SyntheticTaskSpec shipped = task_from_tree(read_config_file(std::string(GI_SOURCE_DIR) + "/configs/task.ini"));
  CHECK(generate_synthetic(shipped, 8, 21) == generate_synthetic(default_task(), 8, 21));
  CHECK(shipped.motifs.size() == 4);
  CHECK(shipped.pairs[0].min_distance == 128);
}

TEST_CASE("generated targets agree with the brute-force labeler") {
  SyntheticTaskSpec spec = default_task();
  const AssayDataset ds = generate_synthetic(spec, 60, 17);
  ds.validate();
  std::size_t with_bonus = 0;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    const auto expected = oracle::brute_targets(decode_one_hot(ds.inputs[r]), spec);
    for (std::size_t j = 0; j < spec.m; ++j)
      for (std::size_t t = 0; t < spec.tracks; ++t) CHECK(ds.targets[r](j, t) == expected[j][t]);
    for (std::size_t j = 0; j < spec.m; ++j) with_bonus += ds.targets[r](j, 1) > 0.0;
  }
  CHECK(with_bonus > 0);
}

TEST_CASE("generation is reproducible per record") {
  const SyntheticTaskSpec spec = default_task();
  const AssayDataset a = generate_synthetic(spec, 6, 3), b = generate_synthetic(spec, 3, 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a.inputs[i] == b.inputs[i]);
  CHECK(a.ids[5] == "syn000005");
  CHECK_FALSE(generate_synthetic(spec, 3, 4).inputs[0] == a.inputs[0]);

  SyntheticTaskSpec noisy = spec;
  noisy.noise = 0.5;
  const AssayDataset n = generate_synthetic(noisy, 4, 3);
  for (const Tensor<double>& y : n.targets)
    for (double v : y.data()) {
      CHECK(v >= 0.0);
      CHECK(v / 0.5 == std::round(v / 0.5));
    }
}

TEST_CASE("dataset container") {
  const auto dir = test::scratch_dir("data_container");
  const std::string path = (dir / "d.gids").string();
  const AssayDataset ds = generate_synthetic(default_task(), 5, 2);
  save_dataset(path, ds);
  CHECK(load_dataset(path) == ds);
  const std::string bytes = slurp(path);

  SUBCASE("truncated") {
    spit(path, bytes.substr(0, bytes.size() - 9));
    CHECK(format_code([&] { load_dataset(path); }) == FormatErrorCode::TruncatedPayload);
  }
  SUBCASE("version") {
    std::string b = bytes;
    b.replace(0, 6, "GIDS 9");
    spit(path, b);
    CHECK(format_code([&] { load_dataset(path); }) == FormatErrorCode::VersionMismatch);
  }
  SUBCASE("magic") {
    spit(path, "HELLO\n" + bytes);
    CHECK(format_code([&] { load_dataset(path); }) == FormatErrorCode::BadMagic);
  }
  SUBCASE("checksum") {
    std::string b = bytes;
    b[b.size() - 3] ^= 0x10;
    spit(path, b);
    CHECK(format_code([&] { load_dataset(path); }) == FormatErrorCode::ChecksumMismatch);
  }
  SUBCASE("header tracks differ from payload") {
    std::string b = bytes;
    const auto at = b.find("tracks 2\n");
    REQUIRE(at != std::string::npos);
    b.replace(at, 9, "tracks 3\n");
    const auto groups = b.find("groups DNase ChIP\n");
    REQUIRE(groups != std::string::npos);
    b.replace(groups, 18, "groups DNase ChIP CAGE\n");
    spit(path, b);
    CHECK(format_code([&] { load_dataset(path); }) == FormatErrorCode::Inconsistent);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_dataset((dir / "none").string()), IoError); }
}

TEST_CASE("block splits") {
  const AssayDataset ds = tiny_dataset(100);
  const DatasetSplit all = split_dataset(ds, {1.0, 0.0, 0.0}, 5);
  CHECK(all.train.size() == 100);
  CHECK(all.val.size() == 0);

  const DatasetSplit a = split_dataset(ds, {0.6, 0.2, 0.2}, 11), b = split_dataset(ds, {0.6, 0.2, 0.2}, 11);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(a.train.size() + a.val.size() + a.test.size() == 100);
  // Blocks of 16 consecutive records never straddle splits.
  std::vector<int> owner(100, -1);
  int which = 0;
  for (const AssayDataset* part : {&a.train, &a.val, &a.test}) {
    for (const std::string& id : part->ids) owner[std::stoul(id.substr(1))] = which;
    ++which;
  }
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(owner[i] >= 0);
    CHECK(owner[i] == owner[i - i % 16]);
  }
  CHECK_THROWS_AS(split_dataset(ds, {0.5, 0.2, 0.2}, 1), ConfigError);
  CHECK_THROWS_AS(split_dataset(tiny_dataset(16), {0.5, 0.25, 0.25}, 1), ConfigError);
}

TEST_CASE("split sizes at a realistic scale") {
  const DatasetSplit s = split_dataset(tiny_dataset(38171), {0.9, 0.05, 0.05}, 2026);
  auto near = [](std::size_t got, long want) { return std::labs(static_cast<long>(got) - want) <= 16; };
  CHECK(near(s.train.size(), 34354));
  CHECK(near(s.val.size(), 1908));
  CHECK(near(s.test.size(), 1909));
}

TEST_CASE("text ingestion") {
  const auto dir = test::scratch_dir("data_text");
  const std::string seqs = (dir / "s.tsv").string(), csv = (dir / "t.csv").string();
  spit(seqs, "a\tACGTACGT\n\nb\tTTTTGGGG\n");
  spit(csv, "record_id,track,bin,value\na,0,1,2.5\nb,1,0,4\n");
  const AssayDataset ds = dataset_from_text(seqs, csv, 2, 4, {"DNase", "CAGE"});
  REQUIRE(ds.size() == 2);
  CHECK(ds.ids[1] == "b");
  CHECK(ds.targets[0](1, 0) == 2.5);
  CHECK(ds.targets[1](0, 1) == 4.0);
  CHECK(ds.targets[1](1, 1) == 0.0);
  spit(csv, "a,0,5,1\n");
  CHECK_THROWS_AS(dataset_from_text(seqs, csv, 2, 4, {"DNase", "CAGE"}), ContractError);
  spit(seqs, "a\tACGT\nb\tACGTAC\n");
  CHECK_THROWS_AS(dataset_from_text(seqs, csv, 1, 4, {"DNase"}), ContractError);
}
