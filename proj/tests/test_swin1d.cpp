// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "gi/grad_check.hpp"
#include "gi/swin1d.hpp"
#include "jacobian.hpp"
#include "oracle.hpp"

using namespace gi;
using gi::test::random_tensor;

namespace {

Tensor<double> run_block(const Swin1dParams& p, const Swin1dConfig& c, const Tensor<double>& x) {
  Tape<double> tape(false);
  auto w = map_tensors<Var<double>>(p, "", [&](const std::string&, const Tensor<double>& t) { return tape.leaf(t, false); });
  return swin1d_forward(tape.constant(x), w, c, false).output.value();
}

Swin1dParams random_block(const Swin1dConfig& c, std::size_t d, Rng& rng) {
  Swin1dParams p = init_swin(c, d, rng);
  for_each_tensor(p, "", [&](const std::string& name, Tensor<double>& t) {
    if (name.find("rel_bias") != std::string::npos || name.find("_b") != std::string::npos)
      for (double& v : t.data()) v += 0.5 * rng.normal();
  });
  return p;
}

}  // namespace

TEST_CASE("block output contract (n/2) x (2d/alpha)") {
  Rng rng(1);
  struct Case {
    std::size_t n, d, k, t, heads;
    double alpha;
  };
  for (const Case& cs : {Case{8, 4, 4, 2, 1, 1.0}, Case{9, 4, 4, 1, 2, 1.0}, Case{16, 8, 8, 4, 2, 2.0},
                         Case{6, 6, 3, 1, 3, 1.5}, Case{2, 2, 1, 0, 1, 1.0}}) {
    Swin1dConfig c{cs.k, cs.t, cs.alpha, cs.heads, true, true};
    const std::size_t out_width = swin_output_width(c, cs.d);
    CHECK(out_width * cs.alpha == doctest::Approx(2.0 * static_cast<double>(cs.d)));
    const Tensor<double> y = run_block(init_swin(c, cs.d, rng), c, random_tensor({cs.n, cs.d}, rng));
    CHECK(y.shape() == Shape{cs.n / 2, out_width});
  }
}

TEST_CASE("invalid block configurations") {
  CHECK_THROWS_AS(swin_output_width(Swin1dConfig{4, 4, 1.0, 1, true, true}, 4), ConfigError);
  CHECK_THROWS_AS(swin_output_width(Swin1dConfig{4, 2, 3.0, 1, true, true}, 4), ConfigError);
  Rng rng(2);
  Swin1dConfig c = swin_config(4, 1);
  CHECK(c.shift == 2);
  Swin1dParams p = init_swin(c, 4, rng);
  CHECK_THROWS_AS(run_block(p, c, random_tensor({1, 4}, rng)), ContractError);
  CHECK_THROWS_AS(run_block(p, c, random_tensor({8, 6}, rng)), DimensionError);
}

TEST_CASE("block matches the plain-loop reference, partial windows included") {
  Rng rng(33);
  for (std::size_t n : {4, 7, 10, 16}) {
    for (std::size_t k : {2, 3, 4}) {
      CAPTURE(n);
      CAPTURE(k);
      Swin1dConfig c{k, k / 2, 1.0, 2, true, true};
      Swin1dParams p = random_block(c, 4, rng);
      Tensor<double> x = random_tensor({n, 4}, rng);
      const Tensor<double> expected = oracle::to_tensor(oracle::swin_block(oracle::to_mat(x), p, c));
      CHECK(test::max_abs_diff(run_block(p, c, x), expected) < 1e-12);
    }
  }
}

TEST_CASE("shifted pass with t = 0 equals plain windowed attention; roll is inverted") {
  Rng rng(5);
  MhaParams p = init_mha({4, 1, false, 4}, rng);
  Tensor<double> x = random_tensor({8, 4}, rng);
  Tape<double> tape(false);
  auto w = map_tensors<Var<double>>(p, "", [&](const std::string&, const Tensor<double>& t) { return tape.leaf(t, false); });
  auto shifted = shifted_pass(tape.constant(x), w, 4, 2, false).output.value();
  const Tensor<double> expected = oracle::to_tensor(oracle::window_pass(oracle::to_mat(x), p, 4, 2));
  CHECK(test::max_abs_diff(shifted, expected) < 1e-12);
}

TEST_CASE("Jacobian sparsity follows the window algebra") {
  Rng rng(7);
  for (std::size_t t : {0, 1, 2, 3}) {
    CAPTURE(t);
    Swin1dConfig c{4, t, 1.0, 1, true, true};
    Swin1dParams p = random_block(c, 4, rng);
    const auto measured = test::block_dependence(p, c, random_tensor({8, 4}, rng));
    CHECK(measured == oracle::dependence_sets(8, 4, t));
  }
}

TEST_CASE("closed-form block multiply-adds equal the tape counter") {
  Rng rng(9);
  for (std::size_t n : {5, 8, 12}) {
    for (bool ff : {false, true}) {
      Swin1dConfig c{4, 1, 2.0, 2, ff, true};
      Swin1dParams p = init_swin(c, 4, rng);
      Tape<double> tape(false);
      auto w = map_tensors<Var<double>>(p, "", [&](const std::string&, const Tensor<double>& t) { return tape.leaf(t, false); });
      swin1d_forward(tape.constant(random_tensor({n, 4}, rng)), w, c, false);
      const BlockMadds m = swin_block_madds(c, n, 4);
      CHECK(tape.madds(MaddKind::Projection) == m.projection);
      CHECK(tape.madds(MaddKind::Score) == m.score);
      CHECK(tape.madds(MaddKind::Mix) == m.mix);
      // Independent closed form.
      const std::uint64_t d = 4, S = (n / 4) * 16 + (n % 4) * (n % 4), np = n - n % 2;
      CHECK(m.total() == 2 * (4 * n * d * d + 2 * d * S + (ff ? 4 * n * d * d : 0)) + (np / 2) * 2 * d * 4);
    }
  }
}

TEST_CASE("block gradients") {
  Rng rng(13);
  Swin1dConfig c{2, 1, 1.0, 1, true, true};
  Swin1dParams p = random_block(c, 4, rng);
  std::vector<Tensor<double>> inputs{random_tensor({4, 4}, rng)};
  for_each_tensor(p, "", [&](const std::string&, Tensor<double>& t) { inputs.push_back(t); });
  const Tensor<double> mix = random_tensor({2, 8}, rng);
  ScalarFunction f = [&](Tape<double>& tape, const std::vector<Var<double>>& v) {
    std::size_t next = 1;
    auto w = map_tensors<Var<double>>(p, "", [&](const std::string&, const Tensor<double>&) { return v[next++]; });
    return sum(mul(swin1d_forward(v[0], w, c, false).output, tape.constant(mix)));
  };
  CHECK(grad_check(f, inputs) < 1e-4);
}

TEST_CASE("capture tags records by layer, slot and window") {
  Rng rng(3);
  Swin1dConfig c{4, 2, 1.0, 2, false, true};
  Swin1dParams p = init_swin(c, 4, rng);
  Tape<double> tape(false);
  auto w = map_tensors<Var<double>>(p, "", [&](const std::string&, const Tensor<double>& t) { return tape.leaf(t, false); });
  auto out = swin1d_forward(tape.constant(random_tensor({10, 4}, rng)), w, c, true, 3);
  REQUIRE(out.records.size() == 6);
  CHECK(out.records[0].slot == 1);
  CHECK(out.records[3].slot == 2);
  CHECK(out.records[2].window == 2);
  CHECK(out.records[2].heads.front().rows() == 2);
  for (const AttentionRecord& r : out.records) {
    CHECK(r.layer == 3);
    CHECK(r.heads.size() == 2);
  }
}
