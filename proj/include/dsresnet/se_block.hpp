// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>

#include "dsresnet/nn_ops.hpp"
#include "dsresnet/tensor.hpp"

namespace dsresnet {

/// Squeeze-and-excitation shape. The excitation bottleneck has
/// max(1, round(channels * reduction)) units.
struct SEConfig {
  std::size_t channels = 1;
  double reduction = 1.0 / 16.0;

  std::size_t bottleneck_dim() const;
};

/// Weights of the two bias-free excitation layers in out x in layout:
/// reduce is bottleneck x C, expand is C x bottleneck.
struct SEWeights {
  Tensor reduce;
  Tensor expand;
};

/// 2 * C * bottleneck.
std::uint64_t se_param_count(const SEConfig& config);

/// Both excitation layers plus the C per-channel rescales.
std::uint64_t se_multiply_count(const SEConfig& config);

/// Channel gates sigmoid(expand * relu(reduce * mean(input))), each in (0, 1).
Tensor se_gates(const Tensor& input, const SEWeights& weights,
                MultiplyCounter* counter = nullptr);

/// input[c, h, w] * gate[c].
Tensor se_forward(const Tensor& input, const SEWeights& weights,
                  MultiplyCounter* counter = nullptr);

}  // namespace dsresnet
