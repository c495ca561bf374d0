// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "dsresnet/errors.hpp"
#include "dsresnet/nn_ops.hpp"
#include "support/oracles.hpp"

namespace dsresnet {
namespace {

using testing::max_abs_diff;
using testing::random_tensor;

TEST(Tensor, ShapeAndIndexing) {
  Tensor t = Tensor::chw(2, 3, 4);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  t.at(1, 2, 3) = 5.0;
  EXPECT_EQ(t[23], 5.0);
  EXPECT_EQ(t.channel(1).size(), 12u);
  EXPECT_EQ(t.shape_string(), "[2x3x4]");
  EXPECT_THROW(t.dim(3), DimensionError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>(3)), DimensionError);
  EXPECT_TRUE(Tensor().empty());
  EXPECT_TRUE(Tensor(std::vector<std::size_t>{}).empty());
}

TEST(SamePadding, OddAndEvenExtents) {
  EXPECT_EQ(same_padding(3, 1).low, 1u);
  EXPECT_EQ(same_padding(3, 1).high, 1u);
  EXPECT_EQ(same_padding(3, 4).low, 4u);
  EXPECT_EQ(same_padding(2, 1).low, 0u);
  EXPECT_EQ(same_padding(2, 1).high, 1u);
  EXPECT_EQ(same_padding(4, 3).total(), 9u);
  EXPECT_EQ(same_padding(4, 3).high, 5u);
  EXPECT_EQ(effective_extent(3, 16), 33u);
}

TEST(Conv, StandardIdentityKernelReturnsInput) {
  Rng rng(1);
  const Tensor in = random_tensor({1, 5, 4}, rng);
  Tensor w({1, 1, 3, 3});
  w[4] = 1.0;
  ConvSpec s{3, 3, 1, 1, 1, ConvKind::kStandard};
  EXPECT_EQ(conv2d_standard(in, w, s), in);
}

TEST(Conv, DilatedOnesKernelSumsOnlyInBoundsTaps) {
  // 3x3 ones kernel at dilation 2 on a 5x5 ones image: the centre sees all
  // nine taps, a corner sees four.
  const Tensor in = Tensor::chw(1, 5, 5, 1.0);
  const Tensor w({1, 1, 3, 3}, 1.0);
  ConvSpec s{3, 3, 1, 2, 2, ConvKind::kStandard};
  const Tensor out = conv2d_standard(in, w, s);
  EXPECT_EQ(out.at(0, 2, 2), 9.0);
  EXPECT_EQ(out.at(0, 0, 0), 4.0);
  EXPECT_EQ(out.at(0, 0, 2), 6.0);
}

TEST(Conv, AllVariantsMatchBruteForceOracle) {
  Rng rng(20260101);
  for (int trial = 0; trial < 120; ++trial) {
    const auto k = testing::random_conv_case(rng);
    const Tensor in = random_tensor({k.c_in, k.h, k.w}, rng);
    const Tensor ws = random_tensor({k.c_out, k.c_in, std::size_t(k.m), std::size_t(k.r)}, rng);
    const Tensor wd = random_tensor({k.c_in, std::size_t(k.m), std::size_t(k.r)}, rng);
    const Tensor wp = random_tensor({k.c_out, k.c_in}, rng);
    SCOPED_TRACE("trial " + std::to_string(trial));
    EXPECT_LE(max_abs_diff(conv2d_standard(in, ws, testing::spec_for(k, ConvKind::kStandard, k.c_out)),
                           testing::oracle_standard(in, ws, k.dh, k.dw)),
              1e-9);
    EXPECT_LE(max_abs_diff(conv2d_depthwise(in, wd, testing::spec_for(k, ConvKind::kDepthwise, k.c_in)),
                           testing::oracle_depthwise(in, wd, k.dh, k.dw)),
              1e-9);
    EXPECT_LE(max_abs_diff(conv2d_pointwise(in, wp), testing::oracle_pointwise(in, wp)), 1e-9);
  }
}

TEST(Conv, DepthwiseThenPointwiseEqualsRankOneFactorizedStandard) {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const auto k = testing::random_conv_case(rng);
    const Tensor in = random_tensor({k.c_in, k.h, k.w}, rng);
    const Tensor wd = random_tensor({k.c_in, std::size_t(k.m), std::size_t(k.r)}, rng);
    const Tensor wp = random_tensor({k.c_out, k.c_in}, rng);
    // W[o,c,i,j] = P[o,c] * D[c,i,j]
    Tensor ws({k.c_out, k.c_in, std::size_t(k.m), std::size_t(k.r)});
    const std::size_t kk = std::size_t(k.m) * std::size_t(k.r);
    for (std::size_t o = 0; o < k.c_out; ++o)
      for (std::size_t c = 0; c < k.c_in; ++c)
        for (std::size_t t = 0; t < kk; ++t) ws[(o * k.c_in + c) * kk + t] = wp[o * k.c_in + c] * wd[c * kk + t];
    const Tensor ds = conv2d_pointwise(
        conv2d_depthwise(in, wd, testing::spec_for(k, ConvKind::kDepthwise, k.c_in)), wp);
    const Tensor st = conv2d_standard(in, ws, testing::spec_for(k, ConvKind::kStandard, k.c_out));
    EXPECT_LE(max_abs_diff(ds, st), 1e-9);
  }
}

TEST(Conv, Linearity) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto k = testing::random_conv_case(rng);
    const ConvSpec s = testing::spec_for(k, ConvKind::kStandard, k.c_out);
    const Tensor a = random_tensor({k.c_in, k.h, k.w}, rng);
    const Tensor b = random_tensor({k.c_in, k.h, k.w}, rng);
    const Tensor w = random_tensor({k.c_out, k.c_in, std::size_t(k.m), std::size_t(k.r)}, rng);
    const double alpha = rng.uniform(-2, 2), beta = rng.uniform(-2, 2);
    Tensor mix(a.shape());
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = alpha * a[i] + beta * b[i];
    const Tensor fa = conv2d_standard(a, w, s), fb = conv2d_standard(b, w, s);
    Tensor expected(fa.shape());
    for (std::size_t i = 0; i < fa.size(); ++i) expected[i] = alpha * fa[i] + beta * fb[i];
    EXPECT_LE(max_abs_diff(conv2d_standard(mix, w, s), expected), 1e-12);
  }
}

TEST(Conv, DepthwiseChannelsAreIndependent) {
  Rng rng(13);
  const Tensor in = random_tensor({3, 6, 5}, rng);
  const Tensor w = random_tensor({3, 3, 3}, rng);
  ConvSpec s{3, 3, 3, 2, 1, ConvKind::kDepthwise};
  const Tensor base = conv2d_depthwise(in, w, s);
  Tensor changed = in;
  for (double& v : changed.channel(1)) v += 10.0;
  const Tensor out = conv2d_depthwise(changed, w, s);
  for (std::size_t c : {0u, 2u}) {
    for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(out.channel(c)[i], base.channel(c)[i]);
  }
}

TEST(Conv, SpatialSizeIsPreserved) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto k = testing::random_conv_case(rng);
    const Tensor in = random_tensor({k.c_in, k.h, k.w}, rng);
    const Tensor w = random_tensor({k.c_in, std::size_t(k.m), std::size_t(k.r)}, rng);
    const Tensor out = conv2d_depthwise(in, w, testing::spec_for(k, ConvKind::kDepthwise, k.c_in));
    EXPECT_EQ(out.dim(1), k.h);
    EXPECT_EQ(out.dim(2), k.w);
  }
}

TEST(Conv, InstrumentedMultipliesEqualParamsTimesPixels) {
  Rng rng(19);
  const Tensor in = random_tensor({4, 9, 7}, rng);
  MultiplyCounter c;
  conv2d_standard(in, random_tensor({5, 4, 3, 3}, rng), ConvSpec{3, 3, 5, 2, 2, ConvKind::kStandard}, &c);
  EXPECT_EQ(c.multiplies, 5u * 4 * 9 * 9 * 7);
  c = {};
  conv2d_depthwise(in, random_tensor({4, 3, 3}, rng), ConvSpec{3, 3, 4, 1, 1, ConvKind::kDepthwise}, &c);
  EXPECT_EQ(c.multiplies, 4u * 9 * 9 * 7);
  c = {};
  conv2d_pointwise(in, random_tensor({6, 4}, rng), &c);
  EXPECT_EQ(c.multiplies, 6u * 4 * 9 * 7);
}

TEST(Conv, DimensionErrorsNameTheAxis) {
  Rng rng(23);
  const Tensor in = random_tensor({3, 4, 4}, rng);
  try {
    conv2d_standard(in, random_tensor({2, 2, 3, 3}, rng), ConvSpec{3, 3, 2, 1, 1, ConvKind::kStandard});
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("input-channel"), std::string::npos) << e.what();
  }
  try {
    conv2d_depthwise(in, random_tensor({3, 3, 3}, rng), ConvSpec{3, 3, 4, 1, 1, ConvKind::kDepthwise});
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("channel"), std::string::npos) << e.what();
  }
  EXPECT_THROW(conv2d_pointwise(in, random_tensor({2, 4}, rng)), DimensionError);
  EXPECT_THROW((ConvSpec{0, 3, 1, 1, 1, ConvKind::kStandard}.validate()), DimensionError);
  EXPECT_THROW((ConvSpec{3, 3, 1, 1, 1, ConvKind::kPointwise}.validate()), DimensionError);
}

TEST(Conv, NonFiniteInputIsRejected) {
  Tensor in = Tensor::chw(1, 3, 3);
  in[4] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(conv2d_standard(in, Tensor({1, 1, 1, 1}, 1.0), ConvSpec{}), NumericError);
  in[4] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(conv2d_pointwise(in, Tensor({1, 1}, 1.0)), NumericError);
}

TEST(Pooling, AverageValidWindows) {
  Tensor in = Tensor::chw(1, 5, 4);
  for (std::size_t i = 0; i < in.size(); ++i) in[i] = static_cast<double>(i);
  MultiplyCounter c;
  const Tensor out = avg_pool2d(in, 2, 2, &c);
  ASSERT_EQ(out.shape(), (std::vector<std::size_t>{1, 2, 2}));
  EXPECT_DOUBLE_EQ(out.at(0, 0, 0), (0 + 1 + 4 + 5) / 4.0);
  EXPECT_DOUBLE_EQ(out.at(0, 1, 1), (10 + 11 + 14 + 15) / 4.0);
  EXPECT_EQ(c.multiplies, 4u);
  EXPECT_EQ(avg_pool2d(Tensor::chw(32, 101, 40), 4, 2).shape(), (std::vector<std::size_t>{32, 25, 20}));
  EXPECT_EQ(avg_pool2d(Tensor::chw(32, 101, 40), 2, 2).shape(), (std::vector<std::size_t>{32, 50, 20}));
  EXPECT_THROW(avg_pool2d(Tensor::chw(1, 1, 4), 2, 2), DimensionError);
}

TEST(Pooling, GlobalAverage) {
  Tensor in = Tensor::chw(2, 2, 2);
  for (std::size_t i = 0; i < 8; ++i) in[i] = static_cast<double>(i);
  const Tensor out = global_avg_pool(in);
  EXPECT_DOUBLE_EQ(out[0], 1.5);
  EXPECT_DOUBLE_EQ(out[1], 5.5);
}

TEST(Activations, ReluSigmoidSoftmax) {
  const Tensor x = Tensor::from_values({-2.0, 0.0, 3.0});
  EXPECT_EQ(relu(x), Tensor::from_values({0.0, 0.0, 3.0}));
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_GT(sigmoid(-800.0), -1e-300);
  EXPECT_DOUBLE_EQ(sigmoid(800.0), 1.0);
  const Tensor p = softmax(Tensor::from_values({1000.0, 1000.0, -1000.0}));
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
  EXPECT_EQ(p[2], 0.0);
}

TEST(FullyConnected, MatrixVector) {
  const Tensor w({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const Tensor y = fully_connected(Tensor::from_values({1, 0, -1}), w);
  EXPECT_EQ(y, Tensor::from_values({-2, -2}));
  EXPECT_THROW(fully_connected(Tensor::from_values({1, 0}), w), DimensionError);
}

}  // namespace
}  // namespace dsresnet
