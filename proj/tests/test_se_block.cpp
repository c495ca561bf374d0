// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "dsresnet/errors.hpp"
#include "dsresnet/se_block.hpp"
#include "support/oracles.hpp"

namespace dsresnet {
namespace {

TEST(SEBlock, CountsAtPresetWidths) {
  EXPECT_EQ(SEConfig{64}.bottleneck_dim(), 4u);
  EXPECT_EQ(se_param_count(SEConfig{64}), 512u);
  EXPECT_EQ(se_multiply_count(SEConfig{64}), 576u);
  EXPECT_EQ(SEConfig{32}.bottleneck_dim(), 2u);
  EXPECT_EQ(se_param_count(SEConfig{32}), 128u);
  EXPECT_EQ(se_multiply_count(SEConfig{32}), 160u);
}

TEST(SEBlock, BottleneckNeverBelowOne) {
  EXPECT_EQ(SEConfig{4}.bottleneck_dim(), 1u);
  EXPECT_EQ(se_param_count(SEConfig{4}), 8u);
  EXPECT_THROW(se_param_count(SEConfig{0}), DimensionError);
}

TEST(SEBlock, CountsMatchInstrumentedForward) {
  for (std::size_t c : {4u, 16u, 32u, 64u}) {
    SEConfig cfg{c};
    Rng rng(c);
    const std::size_t b = cfg.bottleneck_dim();
    SEWeights w{testing::random_tensor({b, c}, rng), testing::random_tensor({c, b}, rng)};
    MultiplyCounter counter;
    se_forward(testing::random_tensor({c, 5, 3}, rng), w, &counter);
    EXPECT_EQ(counter.multiplies, se_multiply_count(cfg)) << "C=" << c;
  }
}

TEST(SEBlock, ZeroWeightsHalveInputExactly) {
  Rng rng(3);
  const Tensor in = testing::random_tensor({64, 7, 5}, rng);
  SEWeights w{Tensor({4, 64}), Tensor({64, 4})};
  const Tensor out = se_forward(in, w);
  for (std::size_t i = 0; i < in.size(); ++i) ASSERT_EQ(out[i], in[i] * 0.5);
}

TEST(SEBlock, GatesMatchHandComputation) {
  // C = 2, b = 1: squeeze = channel means, hidden = relu(w1 . s), gate = sigmoid(w2 * hidden).
  Tensor in = Tensor::chw(2, 1, 2);
  in[0] = 1.0;
  in[1] = 3.0;
  in[2] = -1.0;
  in[3] = -3.0;
  SEWeights w{Tensor({1, 2}, std::vector<double>{1.0, 0.5}), Tensor({2, 1}, std::vector<double>{2.0, -1.0})};
  const double hidden = std::max(0.0, 1.0 * 2.0 + 0.5 * -2.0);
  const Tensor g = se_gates(in, w);
  EXPECT_DOUBLE_EQ(g[0], 1.0 / (1.0 + std::exp(-2.0 * hidden)));
  EXPECT_DOUBLE_EQ(g[1], 1.0 / (1.0 + std::exp(1.0 * hidden)));
  const Tensor out = se_forward(in, w);
  EXPECT_DOUBLE_EQ(out[1], 3.0 * g[0]);
  EXPECT_DOUBLE_EQ(out[3], -3.0 * g[1]);
}

TEST(SEBlock, GatesLieInUnitInterval) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    SEWeights w{testing::random_tensor({2, 32}, rng), testing::random_tensor({32, 2}, rng)};
    const Tensor g = se_gates(testing::random_tensor({32, 4, 4}, rng), w);
    for (double v : g.values()) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(SEBlock, WrongWeightShapesAreRejected) {
  Rng rng(9);
  const Tensor in = testing::random_tensor({8, 3, 3}, rng);
  EXPECT_THROW(se_forward(in, SEWeights{Tensor({1, 7}), Tensor({8, 1})}), DimensionError);
  EXPECT_THROW(se_forward(in, SEWeights{Tensor({1, 8}), Tensor({8, 2})}), DimensionError);
}

}  // namespace
}  // namespace dsresnet
