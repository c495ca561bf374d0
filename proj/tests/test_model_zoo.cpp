// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "dsresnet/errors.hpp"
#include "dsresnet/model_zoo.hpp"
#include "support/oracles.hpp"

namespace dsresnet {
namespace {

ArchitectureSpec conv_plus_ds(int ds_layers) {
  ArchitectureSpec s;
  s.name = "probe";
  s.layers = {LayerConfig{LayerKind::kStandardConv, 3, 3, 8},
              LayerConfig{LayerKind::kDSConv, 3, 3, 8, 0, 0, ds_layers},
              LayerConfig{LayerKind::kGlobalAvgPool}, LayerConfig{LayerKind::kSoftmaxFC, 0, 0, 12}};
  return s;
}

Tensor random_input(std::uint64_t seed) {
  Rng rng(seed);
  Tensor x({1, 101, 40});
  for (double& v : x.values()) v = rng.normal();
  return x;
}

TEST(DilationSchedule, DoublesEveryThirdLayer) {
  const int expected[] = {1, 1, 1, 2, 2, 2, 4, 4, 4, 8, 8, 8, 16, 16, 16};
  for (int i = 0; i < 15; ++i) EXPECT_EQ(dilation_schedule(i), expected[i]) << i;
}

TEST(Presets, ParameterTotals) {
  EXPECT_EQ(build(preset("DS-ResNet18"), 0).total_count(), 71936u);
  EXPECT_EQ(build(preset("DS-ResNet14"), 0).total_count(), 15232u);
  EXPECT_EQ(build(preset("DS-ResNet10"), 0).total_count(), 9984u);
  EXPECT_EQ(build(preset("DS-ResNet18-n"), 0).total_count(), 71424u);
  EXPECT_EQ(build(preset("DS-ResNet18-d"), 0).total_count(), 79616u);
  EXPECT_EQ(build(preset("DS-ResNet18-p"), 0).total_count(), 79616u);
}

TEST(Presets, AllNamedPresetsBuildAndValidate) {
  for (const auto& name : preset_names()) {
    const ArchitectureSpec spec = preset(name);
    EXPECT_NO_THROW(spec.validate()) << name;
    EXPECT_NO_THROW(build(spec, 1).validate()) << name;
  }
  EXPECT_THROW(preset("DS-ResNet99"), ConfigError);
}

TEST(Presets, DepthwiseSeparableLayerCounts) {
  EXPECT_EQ(ds_layer_count(preset("DS-ResNet18")), 15);
  EXPECT_EQ(ds_layer_count(preset("DS-ResNet14")), 11);
  EXPECT_EQ(ds_layer_count(preset("DS-ResNet10")), 7);
}

TEST(ReceptiveField, TimeAxisAgainstInputLength) {
  EXPECT_EQ(receptive_field(conv_plus_ds(12)).time, 93u);
  EXPECT_LT(receptive_field(conv_plus_ds(12)).time, 101u);
  EXPECT_EQ(receptive_field(conv_plus_ds(13)).time, 125u);
  EXPECT_GE(receptive_field(conv_plus_ds(13)).time, 101u);
  EXPECT_EQ(receptive_field(preset("DS-ResNet18")).time, 189u);
}

TEST(ReceptiveField, MonotoneInDepth) {
  std::size_t previous = 0;
  for (int n = 1; n <= 16; ++n) {
    const std::size_t rf = receptive_field(conv_plus_ds(n)).time;
    EXPECT_GT(rf, previous);
    previous = rf;
  }
}

TEST(ReceptiveField, PoolingScalesLaterKernels) {
  ArchitectureSpec s = conv_plus_ds(1);
  s.layers.insert(s.layers.begin() + 1, LayerConfig{LayerKind::kAvgPool, 4, 2});
  // conv 3 -> +3 pool -> one DS layer at jump 4: +2*4.
  EXPECT_EQ(receptive_field(s).time, 3u + 3u + 8u);
  EXPECT_EQ(receptive_field(s).freq, 3u + 1u + 4u);
}

TEST(Expand, ResidualBlockStructure) {
  const ModelParams p = expand(preset("DS-ResNet18"));
  std::size_t begins = 0, ends = 0, depthwise = 0;
  for (const auto& l : p.layers) {
    begins += l.kind == OpKind::kResidualBegin;
    ends += l.kind == OpKind::kResidualEnd;
    depthwise += l.kind == OpKind::kDepthwiseConv;
  }
  EXPECT_EQ(begins, 7u);
  EXPECT_EQ(ends, 7u);
  EXPECT_EQ(depthwise, 15u);
  EXPECT_EQ(p.layers.front().kind, OpKind::kStandardConv);
  EXPECT_EQ(p.layers.back().kind, OpKind::kSoftmaxFC);
  // The last DS layer of the full model runs at dilation 16.
  for (auto it = p.layers.rbegin(); it != p.layers.rend(); ++it) {
    if (it->kind == OpKind::kDepthwiseConv) {
      EXPECT_EQ(it->d_h, 16);
      break;
    }
  }
}

TEST(Build, DeterministicInSeed) {
  const ArchitectureSpec spec = preset("DS-ResNet10");
  EXPECT_EQ(build(spec, 5), build(spec, 5));
  EXPECT_FALSE(build(spec, 5) == build(spec, 6));
}

TEST(Build, HeInitializationScale) {
  const ModelParams p = build(preset("DS-ResNet18"), 3);
  for (const auto& l : p.layers) {
    if (l.kind != OpKind::kPointwiseConv) continue;
    double ss = 0.0;
    for (double v : l.weights.values()) ss += v * v;
    const double sd = std::sqrt(ss / static_cast<double>(l.weights.size()));
    EXPECT_NEAR(sd, std::sqrt(2.0 / 64.0), 0.02) << l.name;
  }
}

TEST(Forward, PosteriorsAreADistribution) {
  for (const char* name : {"DS-ResNet10", "DS-ResNet14"}) {
    const Tensor p = forward(build(preset(name), 1), random_input(2));
    ASSERT_EQ(p.shape(), (std::vector<std::size_t>{12}));
    double sum = 0.0;
    for (double v : p.values()) {
      EXPECT_GE(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12) << name;
  }
}

TEST(Forward, InstrumentedMultipliesMatchAnalyticTotals) {
  const struct {
    const char* name;
    std::uint64_t multiplies;
  } cases[] = {{"DS-ResNet14", 15628096u}, {"DS-ResNet10", 5772096u}};
  for (const auto& c : cases) {
    MultiplyCounter counter;
    forward_logits(build(preset(c.name), 0), random_input(1), nullptr, &counter);
    EXPECT_EQ(counter.multiplies, c.multiplies) << c.name;
  }
}

TEST(Forward, ZeroWeightResidualBlockIsIdentity) {
  ModelParams p = build(preset("DS-ResNet18"), 4);
  std::size_t begin = 0, end = 0;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    if (p.layers[i].name == "block2.begin") begin = i;
    if (p.layers[i].name == "block2.relu") end = i;
  }
  ASSERT_GT(end, begin);
  for (std::size_t i = begin; i < end; ++i) p.layers[i].weights.fill(0.0);
  ForwardTrace trace;
  forward_logits(p, random_input(9), &trace);
  EXPECT_EQ(trace.inputs[end + 1], trace.inputs[begin]);
}

TEST(Forward, ResumeFromTraceReproducesLogits) {
  const ModelParams p = build(preset("DS-ResNet14"), 8);
  ForwardTrace trace;
  const Tensor logits = forward_logits(p, random_input(3), &trace);
  for (std::size_t start : p.weighted_layers()) {
    EXPECT_EQ(forward_logits_from(p, trace, start), logits) << p.layers[start].name;
  }
}

TEST(Forward, InputShapeErrors) {
  const ModelParams p = build(preset("DS-ResNet10"), 0);
  EXPECT_THROW(forward(p, Tensor({101, 40})), DimensionError);
  EXPECT_THROW(forward(p, Tensor({2, 101, 40})), DimensionError);
}

TEST(Validate, RejectsBrokenSpecs) {
  ArchitectureSpec s = conv_plus_ds(2);
  s.layers.pop_back();
  EXPECT_THROW(s.validate(), Error);

  s = conv_plus_ds(2);
  s.layers.insert(s.layers.begin() + 1, LayerConfig{LayerKind::kResidualGroup, 3, 3, 16, 0, 0, 1});
  EXPECT_THROW(s.validate(), DimensionError);

  s = conv_plus_ds(2);
  s.layers.insert(s.layers.begin() + 1, LayerConfig{LayerKind::kAvgPool, 200, 2});
  EXPECT_THROW(s.validate(), DimensionError);
}

}  // namespace
}  // namespace dsresnet
