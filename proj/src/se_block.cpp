// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsresnet/se_block.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dsresnet/errors.hpp"

namespace dsresnet {

std::size_t SEConfig::bottleneck_dim() const {
  if (channels < 1 || !(reduction > 0.0)) {
    throw DimensionError("SE config: channels and reduction must be positive");
  }
  const double scaled = std::round(static_cast<double>(channels) * reduction);
  return std::max<std::size_t>(1, static_cast<std::size_t>(scaled));
}

std::uint64_t se_param_count(const SEConfig& config) {
  return 2ULL * config.channels * config.bottleneck_dim();
}

std::uint64_t se_multiply_count(const SEConfig& config) {
  return se_param_count(config) + config.channels;
}

Tensor se_gates(const Tensor& input, const SEWeights& weights, MultiplyCounter* counter) {
  require_rank(input, 3, "se_forward input");
  require_rank(weights.reduce, 2, "se_forward reduce weights");
  require_rank(weights.expand, 2, "se_forward expand weights");
  const std::size_t c = input.dim(0);
  const std::size_t b = weights.reduce.dim(0);
  if (weights.reduce.dim(1) != c || weights.expand.dim(0) != c || weights.expand.dim(1) != b) {
    throw DimensionError("se_forward: excitation weights " + weights.reduce.shape_string() +
                         " / " + weights.expand.shape_string() + " inconsistent with " +
                         std::to_string(c) + " channels");
  }
  // Counter convention for SE: excitation products plus one rescale per
  // channel. The squeeze mean is not counted.
  const Tensor squeezed = global_avg_pool(input);
  const Tensor hidden = relu(fully_connected(squeezed, weights.reduce, counter));
  return sigmoid(fully_connected(hidden, weights.expand, counter));
}

Tensor se_forward(const Tensor& input, const SEWeights& weights, MultiplyCounter* counter) {
  const Tensor gates = se_gates(input, weights, counter);
  Tensor out = input;
  for (std::size_t ch = 0; ch < input.dim(0); ++ch) {
    for (double& v : out.channel(ch)) v *= gates[ch];
  }
  if (counter) counter->multiplies += input.dim(0);
  return out;
}

}  // namespace dsresnet
