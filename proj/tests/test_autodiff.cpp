// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <tuple>

#include "gi/autodiff.hpp"
#include "gi/grad_check.hpp"
#include "primitive_suite.hpp"
#include "test_util.hpp"

using namespace gi;
using gi::test::random_tensor;

using gi::test::probe;

TEST_CASE("matmul values and counts") {
  Tape<double> tape;
  auto a = tape.leaf(Tensor<double>::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  auto b = tape.leaf(Tensor<double>::matrix(3, 2, {7, 8, 9, 10, 11, 12}));
  auto c = matmul(a, b);
  CHECK(c.value() == Tensor<double>::matrix(2, 2, {58, 64, 139, 154}));
  CHECK(tape.madds(MaddKind::Projection) == 12);
  CHECK(tape.madds(MaddKind::Score) == 0);

  auto bad = tape.leaf(Tensor<double>({2, 2}));
  CHECK_THROWS_AS(matmul(a, bad), DimensionError);
}

TEST_CASE("backward is idempotent and rejects non-scalars") {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>::matrix(1, 2, {3, -1}));
  auto y = sum(mul(x, x));
  tape.backward(y);
  const Tensor<double> first = x.grad();
  tape.backward(y);
  CHECK(x.grad() == first);
  CHECK(first == Tensor<double>::matrix(1, 2, {6, -2}));
  CHECK_THROWS_AS(tape.backward(mul(x, x)), ContractError);

  Tape<double> frozen(false);
  auto z = frozen.leaf(Tensor<double>::scalar(1.0));
  CHECK_THROWS_AS(frozen.backward(z), ContractError);
}

TEST_CASE("operands from different tapes are rejected") {
  Tape<double> t1, t2;
  auto a = t1.leaf(Tensor<double>({2, 2}));
  auto b = t2.leaf(Tensor<double>({2, 2}));
  CHECK_THROWS_AS(add(a, b), ContractError);
}

TEST_CASE("softmax rows are stochastic and shift invariant") {
  Tape<double> tape;
  Rng rng(3);
  Tensor<double> x = random_tensor({4, 5}, rng, 10.0);
  auto s = softmax(tape.leaf(x), 1);
  for (std::size_t i = 0; i < 4; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < 5; ++j) total += s.value()(i, j);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  }
  Tensor<double> shifted = x;
  for (double& v : shifted.data()) v += 1000.0;
  auto s2 = softmax(tape.leaf(shifted), 1);
  CHECK(test::max_abs_diff(s.value(), s2.value()) < 1e-12);
}

TEST_CASE("layer_norm output has zero mean and unit variance per row") {
  Tape<double> tape;
  Rng rng(5);
  auto y = layer_norm(tape.leaf(random_tensor({3, 8}, rng, 4.0)), tape.leaf(Tensor<double>({8}, 1.0)),
                      tape.leaf(Tensor<double>({8})));
  for (std::size_t i = 0; i < 3; ++i) {
    double mu = 0.0, var = 0.0;
    for (std::size_t j = 0; j < 8; ++j) mu += y.value()(i, j) / 8.0;
    for (std::size_t j = 0; j < 8; ++j) var += (y.value()(i, j) - mu) * (y.value()(i, j) - mu) / 8.0;
    CHECK(std::abs(mu) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("gelu and softplus reference values") {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>::matrix(1, 3, {-1.0, 0.0, 2.0}));
  auto g = gelu(x);
  CHECK(g.value()[0] == doctest::Approx(-0.15865525393145707));
  CHECK(g.value()[1] == 0.0);
  CHECK(g.value()[2] == doctest::Approx(1.9544997361036416));
  auto big = softplus(tape.leaf(Tensor<double>::matrix(1, 3, {-800.0, 0.0, 800.0})));
  CHECK(big.value()[0] >= 0.0);
  CHECK(big.value()[1] == doctest::Approx(std::log(2.0)));
  CHECK(big.value()[2] == 800.0);
}

TEST_CASE("roll and concat_pairs rearrange rows") {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>::matrix(4, 1, {0, 1, 2, 3}));
  CHECK(roll(x, 1).value() == Tensor<double>::matrix(4, 1, {3, 0, 1, 2}));
  CHECK(roll(x, -1).value() == Tensor<double>::matrix(4, 1, {1, 2, 3, 0}));
  CHECK(roll(roll(x, 3), -3).value() == x.value());
  CHECK(concat_pairs(x).value() == Tensor<double>::matrix(2, 2, {0, 1, 2, 3}));
  auto odd = tape.leaf(Tensor<double>({3, 2}));
  CHECK_THROWS_AS(concat_pairs(odd), ContractError);
}

TEST_CASE("relative position bias reads offset rows") {
  Tape<double> tape;
  // k = 3: rows hold offsets -2..2; two heads.
  auto table = tape.leaf(Tensor<double>::matrix(5, 2, {-2, 20, -1, 10, 0, 0, 1, -10, 2, -20}));
  auto b = relative_position_bias(table, 3, 1);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(b.value()(i, j) == -10.0 * (static_cast<double>(j) - static_cast<double>(i)));
  CHECK_THROWS_AS(relative_position_bias(table, 4, 0), DimensionError);
}

TEST_CASE("scaled_dot_attention matches a direct evaluation and counts madds") {
  Tape<double> tape;
  Rng rng(11);
  const std::size_t len = 5, dh = 3;
  Tensor<double> q = random_tensor({len, dh}, rng), k = random_tensor({len, dh}, rng), v = random_tensor({len, dh}, rng);
  auto out = scaled_dot_attention(tape.leaf(q), tape.leaf(k), tape.leaf(v));
  for (std::size_t i = 0; i < len; ++i) {
    std::vector<double> w(len);
    double total = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < dh; ++c) dot += q(i, c) * k(j, c);
      w[j] = std::exp(dot / std::sqrt(3.0));
      total += w[j];
    }
    for (std::size_t c = 0; c < dh; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < len; ++j) acc += w[j] / total * v(j, c);
      CHECK(out.output.value()(i, c) == doctest::Approx(acc).epsilon(1e-13));
    }
  }
  CHECK(tape.madds(MaddKind::Score) == len * len * dh);
  CHECK(tape.madds(MaddKind::Mix) == len * len * dh);
}

TEST_CASE("every primitive passes a finite-difference gradient check") {
  Rng rng(2024);
  for (const auto& [r, c, k] : {std::tuple{3, 4, 2}, std::tuple{2, 3, 5}, std::tuple{6, 5, 3}}) {
    for (const auto& [name, err] : test::primitive_grad_errors(r, c, k, rng)) {
      CAPTURE(name);
      CHECK(err < 1e-6);
    }
  }
}

TEST_CASE("grad_check reports non-finite values") {
  ScalarFunction f = [](Tape<double>&, const std::vector<Var<double>>& v) { return sum(v[0]); };
  Tensor<double> bad({2}, 1.0);
  bad[1] = std::nan("");
  CHECK_THROWS_AS(grad_check(f, {bad}), NumericError);
}

TEST_CASE("float tape agrees with the double tape") {
  Rng rng(8);
  Tensor<double> a = random_tensor({4, 6}, rng), b = random_tensor({6, 3}, rng);
  Tape<double> td;
  Tape<float> tf;
  auto yd = softmax(matmul(td.leaf(a), td.leaf(b)), 1);
  auto yf = softmax(matmul(tf.leaf(a.cast<float>()), tf.leaf(b.cast<float>())), 1);
  CHECK(test::max_abs_diff(yd.value(), yf.value().cast<double>()) < 1e-5);
}
