// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <fstream>

#include "gi/grad_check.hpp"
#include "gi/model.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace gi;
using gi::test::random_onehot;
using gi::test::random_tensor;

namespace {

InterpreterConfig config_from(const std::string& text) { return model_config_from_tree(parse_config_text(text)); }

InterpreterConfig toy() {
  return config_from("[model]\nn = 16\nd_model = 4\nK = 2\nm = 4\ntracks = 3\nwindow = 4\nheads = 2\n");
}

// Perturb zero-initialised biases and tables so the reference comparison sees them.
void jitter(InterpreterParams& p, Rng& rng) {
  for_each_tensor(p, [&](const std::string&, Tensor<double>& t) {
    for (double& v : t.data()) v += 0.1 * rng.normal();
  });
}

}  // namespace

TEST_CASE("auto depth and alpha schedule") {
  CHECK(auto_depth(16, 4) == 2);
  CHECK(auto_depth(512, 8) == 6);
  CHECK(auto_depth(131072, 1024) == 7);
  CHECK(auto_depth(7, 7) == 0);
  CHECK_THROWS_AS(auto_depth(8, 0), ConfigError);
  CHECK(alpha_schedule(8, 4, 32) == std::vector<double>{1, 1, 2, 2});
  CHECK(alpha_schedule(4, 2, 0) == std::vector<double>{2, 2});
}

TEST_CASE("shape law over a grid of configurations") {
  Rng rng(101);
  std::size_t checked = 0;
  for (std::size_t n : {8, 13, 16, 24, 32}) {
    for (std::size_t m : {1, 2, 3}) {
      for (std::size_t cap : {0, 8, 16}) {
        for (std::size_t window : {2, 3, 4}) {
          const std::size_t depth = auto_depth(n, m);
          if (depth == 0) continue;
          ConfigTree tree;
          tree.put("model.n", n);
          tree.put("model.m", m);
          tree.put("model.d_model", 4);
          tree.put("model.tracks", 2);
          tree.put("model.window", window);
          tree.put("model.shift", window / 2);
          tree.put("model.width_cap", cap);
          tree.put("model.heads", 1);
          const InterpreterConfig c = model_config_from_tree(tree);
          CAPTURE(n);
          CAPTURE(m);
          CAPTURE(window);
          // Independent recurrence: tokens halve (floor), width becomes 2d/α.
          std::size_t tokens = n;
          double width = 4.0;
          for (const Swin1dConfig& s : c.layers) {
            tokens /= 2;
            width = 2.0 * width / s.alpha;
          }
          CHECK(tokens == (n >> depth));
          Tape<double> tape(false);
          auto out = forward(bind(tape, build(c, 3), false), tape.constant(random_onehot(n, rng)), c);
          CHECK(out.encoded.shape() == Shape{tokens, static_cast<std::size_t>(width)});
          CHECK(out.prediction.shape() == Shape{m, 2});
          ++checked;
        }
      }
    }
  }
  CHECK(checked >= 50);
}

TEST_CASE("forward pass matches the plain-loop model") {
  Rng rng(7);
  for (const char* extra : {"", "ff = false\n", "width_cap = 4\n", "final_blocks = 2\nsoftplus = false\n",
                            "windows = 3,2\nshifts = 1,1\n"}) {
    CAPTURE(extra);
    const InterpreterConfig c = config_from(std::string("[model]\nn = 18\nd_model = 4\nK = 2\nm = 3\ntracks = 2\n") +
                                            "window = 4\nheads = 2\n" + extra);
    InterpreterParams p = build(c, 11);
    jitter(p, rng);
    const Tensor<double> x = random_onehot(c.n, rng);
    CHECK(test::max_abs_diff(predict(p, c, x), oracle::model(p, c, x)) < 1e-11);
    CHECK(test::max_abs_diff(predict<float>(p, c, x), oracle::model(p, c, x)) < 1e-4);
  }
}

TEST_CASE("crop keeps the centre") {
  Tape<double> tape;
  auto h = tape.leaf(Tensor<double>::matrix(7, 1, {0, 1, 2, 3, 4, 5, 6}));
  CHECK(crop(h, 3).value() == Tensor<double>::matrix(3, 1, {2, 3, 4}));
  CHECK(crop(h, 4).value() == Tensor<double>::matrix(4, 1, {1, 2, 3, 4}));
  CHECK(crop(h, 7).value() == h.value());
  CHECK_THROWS_AS(crop(h, 8), ContractError);
}

TEST_CASE("invalid configurations are rejected") {
  CHECK_THROWS_AS(config_from("[model]\nn = 16\nm = 8\nK = 2\n"), ConfigError);
  CHECK_THROWS_AS(config_from("[model]\nn = 16\nd_model = 4\nm = 4\nheads = 3\n"), ConfigError);
  CHECK_THROWS_AS(config_from("[model]\nn = 16\nm = 4\nwindow = 4\nshift = 4\n"), ConfigError);
  CHECK_THROWS_AS(config_from("[model]\nn = 16\nm = 4\ntracks = 2\ntrack_groups = a,b,c\n"), ConfigError);
  CHECK_THROWS_AS(config_from("[model]\nn = 16\nm = 4\nK = 2\nwindows = 4,4,4\n"), ConfigError);
}

TEST_CASE("config text round trip") {
  const InterpreterConfig c =
      config_from("[model]\nn = 64\nd_model = 6\nm = 4\nwidth_cap = 12\nwindows = 8,4,4,2\nshifts = 4,2,2,1\nheads = 3\n"
                  "final_ff = false\ntracks = 2\ntrack_groups = DNase,ChIP\n");
  ConfigTree tree;
  model_config_to_tree(c, tree);
  const InterpreterConfig back = model_config_from_tree(parse_config_text(config_to_text(tree)));
  ConfigTree again;
  model_config_to_tree(back, again);
  CHECK(config_to_text(again) == config_to_text(tree));
  CHECK(back.track_groups == std::vector<std::string>{"DNase", "ChIP"});
  CHECK(back.layers.size() == 4);
  CHECK(back.layers[0].window == 8);
  CHECK(back.layers[2].alpha == 2.0);
}

TEST_CASE("seeded initialisation") {
  const InterpreterConfig c = toy();
  const InterpreterParams a = build(c, 5), b = build(c, 5), other = build(c, 6);
  CHECK(a.head_w == b.head_w);
  CHECK(a.swin[1].mha2.wq == b.swin[1].mha2.wq);
  CHECK_FALSE(a.embed_w == other.embed_w);
  validate_params(c, a);
  InterpreterParams broken = a;
  broken.head_w = Tensor<double>({3, 3});
  CHECK_THROWS_AS(validate_params(c, broken), DimensionError);
}

TEST_CASE("checkpoint round trip is bit exact") {
  const auto dir = test::scratch_dir("model_ckpt");
  const InterpreterConfig c = toy();
  Rng rng(8);
  InterpreterParams p = build(c, 1);
  jitter(p, rng);
  const std::string path = (dir / "m.bin").string();
  save_checkpoint(path, c, p);
  const Checkpoint back = load_checkpoint(path);
  std::vector<Tensor<double>> want, got;
  for_each_tensor(p, [&](const std::string&, Tensor<double>& t) { want.push_back(t); });
  InterpreterParams loaded = back.params;
  for_each_tensor(loaded, [&](const std::string&, Tensor<double>& t) { got.push_back(t); });
  CHECK(want == got);
  const Tensor<double> x = random_onehot(c.n, rng);
  CHECK(predict(back.params, back.config, x) == predict(p, c, x));

  SUBCASE("bad magic") {
    std::ofstream(path, std::ios::binary | std::ios::trunc) << "NOTACKPTxxxxxxxxxxxxxxxx";
    try {
      load_checkpoint(path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.code() == FormatErrorCode::BadMagic);
    }
  }
  SUBCASE("truncated") {
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 5);
    try {
      load_checkpoint(path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.code() == FormatErrorCode::TruncatedPayload);
    }
  }
  SUBCASE("missing") { CHECK_THROWS_AS(load_checkpoint((dir / "absent.bin").string()), IoError); }
}

TEST_CASE("closed-form multiply-adds equal the tape counter") {
  Rng rng(12);
  for (const char* extra : {"", "ff = false\n", "windows = 3,2\nshifts = 1,1\n", "final_blocks = 2\nfinal_ff = false\n"}) {
    CAPTURE(extra);
    const InterpreterConfig c =
        config_from(std::string("[model]\nn = 21\nd_model = 4\nK = 2\nm = 3\ntracks = 2\nwindow = 4\nheads = 2\n") +
                    extra);
    Tape<double> tape(false);
    forward(bind(tape, build(c, 1), false), tape.constant(random_onehot(c.n, rng)), c);
    const MaddReport r = count_madds(c);
    CHECK(tape.madds(MaddKind::Score) == r.score());
    CHECK(tape.madds(MaddKind::Mix) == r.mix());
    CHECK(tape.madds(MaddKind::Projection) + tape.madds(MaddKind::Score) + tape.madds(MaddKind::Mix) == r.total());
  }
}

TEST_CASE("atlas layout spans and record counts") {
  const InterpreterConfig c = config_from("[model]\nn = 40\nd_model = 4\nK = 3\nm = 5\nwindows = 8,4,3\n");
  const auto layers = atlas_layout(c);
  REQUIRE(layers.size() == 3);
  CHECK(layers[0].tokens == 40);
  CHECK(layers[1].tokens == 20);
  CHECK(layers[2].tokens == 10);
  CHECK(layers[0].span == 1);
  CHECK(layers[1].span == 2);
  CHECK(layers[2].span == 4);
  CHECK(layers[2].windows == 4);
  CHECK(atlas_record_count(c) == 2 * (5 + 5 + 4));

  Rng rng(2);
  Tape<double> tape(false);
  auto out = forward(bind(tape, build(c, 1), false), tape.constant(random_onehot(c.n, rng)), c, true);
  REQUIRE(out.atlas);
  CHECK(out.atlas->records.size() == atlas_record_count(c));
}

TEST_CASE("full toy model gradients") {
  const InterpreterConfig c = toy();
  Rng rng(77);
  InterpreterParams p = build(c, 2);
  jitter(p, rng);
  std::vector<Tensor<double>> inputs;
  for_each_tensor(p, [&](const std::string&, Tensor<double>& t) { inputs.push_back(t); });
  const Tensor<double> x = random_onehot(c.n, rng);
  const Tensor<double> mix = random_tensor({c.m, c.tracks}, rng);
  ScalarFunction f = [&](Tape<double>& tape, const std::vector<Var<double>>& v) {
    std::size_t next = 0;
    auto w = map_tensors<Var<double>>(p, [&](const std::string&, const Tensor<double>&) { return v[next++]; });
    return sum(mul(forward(w, tape.constant(x), c).prediction, tape.constant(mix)));
  };
  CHECK(grad_check(f, inputs) < 1e-4);
}
