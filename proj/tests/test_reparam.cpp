// Copyright 2026 The Conv-INR Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include "inr/reparam.hpp"
#include "oracles.hpp"

using namespace inr;

namespace {

// Decorated conv model whose BN layers carry non-trivial running statistics.
template <typename T>
Model<T> decorated_model(Rng& rng, Decoration d, std::size_t depth = 3, std::size_t width = 6) {
  ModelSpec s;
  s.depth = depth;
  s.width = width;
  s.decoration = d;
  s.expand = 2;
  Model<T> m = build_model<T>(s, rng);
  oracle::randomize_statistics(rng, m);
  return m;
}

std::vector<Tensor<double>> probes(Rng& rng) {
  std::vector<Tensor<double>> out{make_coordinate_grid<double>(8, 8)};
  for (auto [h, w] : {std::pair{5, 7}, {16, 16}, {23, 11}}) out.push_back(oracle::random_tensor<double>(rng, h, w, 2));
  return out;
}

}  // namespace

TEST_SUITE("reparam") {
  TEST_CASE("fold_bn worked example") {
    auto k = ConvKernel<double>::zeros(1, 1, 1);
    k.weights[0] = 2.0;
    k.bias[0] = 1.0;
    BnParams<double> bn = BnParams<double>::identity(1, 0.25);
    bn.gamma[0] = 3.0;
    bn.beta[0] = 0.5;
    bn.mu[0] = 2.0;
    bn.var[0] = 3.75;
    const auto f = fold_bn(k, bn);
    // scale = 3 / 2, weight 2 * 1.5, bias (1 - 2) * 1.5 + 0.5.
    CHECK(f.weights[0] == 3.0);
    CHECK(f.bias[0] == -1.0);
  }

  TEST_CASE("fold_bn matches conv then eval batch norm") {
    Rng rng(1);
    for (int trial = 0; trial < 10; ++trial) {
      const auto k = oracle::random_kernel<double>(rng, 3, 2, 4);
      const auto bn = oracle::random_bn<double>(rng, 4);
      const auto x = oracle::random_tensor<double>(rng, 6, 5, 2);
      const auto ref = batchnorm_forward(conv2d_forward(x, k), bn, Mode::Eval).y;
      CHECK(max_abs_diff(conv2d_forward(x, fold_bn(k, bn)), ref) <= 1e-12);
    }
  }

  TEST_CASE("folding into an identity BN changes nothing") {
    Rng rng(2);
    const auto k = oracle::random_kernel<double>(rng, 3, 3, 5);
    const auto bn = BnParams<double>::identity(5, 0.25);
    const auto f = fold_bn(k, bn);
    CHECK(f == k);
    CHECK(fold_bn(f, bn) == k);
    CHECK_THROWS_AS(fold_bn(k, BnParams<double>::identity(4)), ShapeError);
  }

  TEST_CASE("branch fusion is linearity of convolution") {
    Rng rng(3);
    std::vector<ConvKernel<double>> br;
    for (int n = 0; n < 3; ++n) br.push_back(oracle::random_kernel<double>(rng, 3, 2, 3));
    const auto x = oracle::random_tensor<double>(rng, 7, 7, 2);
    Tensor<double> sum(7, 7, 3);
    for (const auto& k : br) {
      const auto y = conv2d_forward(x, k);
      for (std::size_t i = 0; i < sum.numel(); ++i) sum.data()[i] += y.data()[i];
    }
    CHECK(max_abs_diff(conv2d_forward(x, fuse_branches<double>(br)), sum) <= 1e-12);
    // Order of the branches does not matter beyond rounding.
    std::vector<ConvKernel<double>> rev(br.rbegin(), br.rend());
    CHECK(max_abs_diff(conv2d_forward(x, fuse_branches<double>(rev)), sum) <= 1e-12);

    br.push_back(oracle::random_kernel<double>(rng, 1, 2, 3));
    CHECK_THROWS_AS(fuse_branches<double>(br), ShapeError);
    CHECK_THROWS_AS(fuse_branches<double>({}), ShapeError);
  }

  TEST_CASE("pointwise chain fusion is a matrix product") {
    Rng rng(4);
    const auto main = oracle::random_kernel<double>(rng, 3, 2, 3);
    const auto up = oracle::random_kernel<double>(rng, 1, 3, 6);
    const auto down = oracle::random_kernel<double>(rng, 1, 6, 3);
    const std::vector<ConvKernel<double>> chain{up, down};
    const auto fused = fuse_pointwise_chain<double>(main, chain);
    REQUIRE(fused.k == 3);
    REQUIRE(fused.cout == 3);
    // W' = W * U * D, b' = (b * U + bu) * D + bd written out entry by entry.
    const std::size_t taps = 3 * 3 * 2;
    for (std::size_t r = 0; r < taps; ++r) {
      for (std::size_t o = 0; o < 3; ++o) {
        double acc = 0.0;
        for (std::size_t m = 0; m < 3; ++m)
          for (std::size_t e = 0; e < 6; ++e) acc += main.weights[r * 3 + m] * up.weights[m * 6 + e] * down.weights[e * 3 + o];
        CHECK(fused.weights[r * 3 + o] == doctest::Approx(acc).epsilon(1e-12));
      }
    }
    for (std::size_t o = 0; o < 3; ++o) {
      double acc = down.bias[o];
      for (std::size_t e = 0; e < 6; ++e) {
        double ue = up.bias[e];
        for (std::size_t m = 0; m < 3; ++m) ue += main.bias[m] * up.weights[m * 6 + e];
        acc += ue * down.weights[e * 3 + o];
      }
      CHECK(fused.bias[o] == doctest::Approx(acc).epsilon(1e-12));
    }
    const auto x = oracle::random_tensor<double>(rng, 5, 6, 2);
    const auto ref = conv2d_forward(conv2d_forward(conv2d_forward(x, main), up), down);
    CHECK(max_abs_diff(conv2d_forward(x, fused), ref) <= 1e-12);

    const std::vector<ConvKernel<double>> bad{down};
    CHECK_THROWS_AS(fuse_pointwise_chain<double>(main, bad), ShapeError);
    const std::vector<ConvKernel<double>> wide{oracle::random_kernel<double>(rng, 3, 3, 3)};
    CHECK_THROWS_AS(fuse_pointwise_chain<double>(main, wide), ShapeError);
  }

  TEST_CASE("static decorations fuse to the undecorated shape") {
    Rng rng(5);
    for (Decoration d : {Decoration::TripleBranch, Decoration::PointwiseChain}) {
      CAPTURE(to_string(d));
      const auto m = decorated_model<double>(rng, d);
      const auto r = fuse_model<double>(m);
      ModelSpec plain = m.spec;
      plain.decoration = Decoration::None;
      const auto ref = build_model<double>(plain, rng);
      CHECK(r.model.parameter_count() == ref.parameter_count());
      CHECK(r.report.params_after == ref.parameter_count());
      CHECK(r.report.params_before > r.report.params_after);
      for (std::size_t n = 0; n < ref.blocks.size(); ++n) {
        CHECK(r.model.blocks[n].decoration == Decoration::None);
        CHECK(r.model.blocks[n].main.k == ref.blocks[n].main.k);
        CHECK(r.model.blocks[n].main.cin == ref.blocks[n].main.cin);
        CHECK(r.model.blocks[n].main.cout == ref.blocks[n].main.cout);
      }
      CHECK(r.model.spec.decoration == Decoration::None);
      const auto inputs = probes(rng);
      CHECK(verify_equivalence<double>(m, r.model, inputs) <= 1e-9);
      CHECK(r.report.max_deviation <= 1e-9);
      for (double v : r.report.block_deviation) CHECK(v <= 1e-9);
    }
  }

  TEST_CASE("float fusion stays within the single precision tolerance") {
    Rng rng(6);
    for (Decoration d : {Decoration::TripleBranch, Decoration::PointwiseChain}) {
      const auto m = decorated_model<float>(rng, d);
      const auto r = fuse_model<float>(m);
      std::vector<Tensor<float>> inputs{make_coordinate_grid<float>(16, 16), oracle::random_tensor<float>(rng, 5, 7, 2)};
      CHECK(verify_equivalence<float>(m, r.model, inputs) <= 1e-4);
    }
  }

  TEST_CASE("dynamic gate with constant coefficients") {
    Rng rng(7);
    auto m = decorated_model<double>(rng, Decoration::DynamicGate, 2, 4);
    const auto grid = make_coordinate_grid<double>(6, 6);
    // Huge expand bias saturates the sigmoid at one; zero weights and bias give 0.5.
    for (double bias : {40.0, 0.0}) {
      for (auto& b : m.blocks) {
        std::fill(b.gate->expand.weights.begin(), b.gate->expand.weights.end(), 0.0);
        std::fill(b.gate->expand.bias.begin(), b.gate->expand.bias.end(), bias);
      }
      const auto r = fuse_dynamic(m, grid);
      const double coeff = bias > 0 ? 1.0 : 0.5;
      const auto folded = fold_bn(m.blocks[0].main, m.blocks[0].bn_main);
      for (std::size_t i = 0; i < folded.weights.size(); ++i) {
        CHECK(r.model.blocks[0].main.weights[i] == doctest::Approx(coeff * folded.weights[i]).epsilon(1e-12));
      }
      CHECK(verify_equivalence<double>(m, r.model, std::span(&grid, 1)) <= 1e-9);
    }
  }

  TEST_CASE("dynamic gate fusion is exact on its grid and pinned to it") {
    Rng rng(8);
    auto m = decorated_model<double>(rng, Decoration::DynamicGate);
    m.train_grid = GridShape{9, 7};
    const auto grid = make_coordinate_grid<double>(9, 7);
    const auto r = fuse_model<double>(m, grid);
    CHECK(r.report.pass == "dr");
    CHECK(r.model.fixed_grid == GridShape{9, 7});
    CHECK(r.report.max_deviation <= 1e-9);
    CHECK(verify_equivalence<double>(m, r.model, std::span(&grid, 1)) <= 1e-9);
    CHECK_THROWS_AS(model_predict(r.model, make_coordinate_grid<double>(9, 8)), GridMismatch);
    CHECK_THROWS_AS(fuse_dynamic(m, make_coordinate_grid<double>(8, 8)), GridMismatch);
    CHECK_THROWS_AS(fuse_model<double>(m), ShapeError);

    ModelSpec plain = m.spec;
    plain.decoration = Decoration::None;
    CHECK(r.model.parameter_count() == build_model<double>(plain, rng).parameter_count());
  }

  TEST_CASE("undecorated models pass through untouched") {
    Rng rng(9);
    ModelSpec s;
    s.depth = 2;
    s.width = 4;
    const auto m = build_model<float>(s, rng);
    const auto r = fuse_model<float>(m);
    CHECK(r.report.pass == "none");
    CHECK(r.model.blocks == m.blocks);
    CHECK(r.model.head == m.head);
    CHECK(r.report.params_before == r.report.params_after);
  }

  TEST_CASE("verify_equivalence detects a perturbation") {
    Rng rng(10);
    const auto m = decorated_model<double>(rng, Decoration::None);
    const auto inputs = probes(rng);
    CHECK(verify_equivalence<double>(m, m, inputs) == 0.0);
    auto p = m;
    p.head.bias[1] += 1e-3;
    CHECK(verify_equivalence<double>(m, p, inputs) == doctest::Approx(1e-3));
  }

  TEST_CASE("report text") {
    Rng rng(11);
    const auto r = fuse_model<double>(decorated_model<double>(rng, Decoration::TripleBranch, 2, 4));
    const std::string text = r.report.to_text();
    CHECK(text.find("pass=sr") != std::string::npos);
    CHECK(text.find("params_after=") != std::string::npos);
  }
}
