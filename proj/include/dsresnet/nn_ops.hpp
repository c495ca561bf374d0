// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Forward neural primitives on CHW tensors. Convolutions are stride 1,
// bias-free, with zero "same" padding; pooling uses VALID windows.

#pragma once

#include <cstddef>
#include <cstdint>

#include "dsresnet/tensor.hpp"

namespace dsresnet {

enum class ConvKind { kStandard, kDepthwise, kPointwise };

struct ConvSpec {
  int kernel_h = 1;      // m
  int kernel_w = 1;      // r
  int out_channels = 1;  // n
  int dilation_h = 1;    // d_h
  int dilation_w = 1;    // d_w
  ConvKind kind = ConvKind::kStandard;

  /// Throws DimensionError on non-positive fields or a pointwise spec with
  /// a kernel/dilation other than 1.
  void validate() const;
};

/// Zero padding that keeps a stride-1 dilated kernel size-preserving. The
/// odd pixel of an even total goes to the high side.
struct SamePadding {
  std::size_t low = 0;
  std::size_t high = 0;
  std::size_t total() const noexcept { return low + high; }
};

/// Extent spanned by a kernel of size k at dilation d: (k-1)*d + 1.
constexpr std::size_t effective_extent(std::size_t kernel, std::size_t dilation) noexcept {
  return (kernel - 1) * dilation + 1;
}

SamePadding same_padding(std::size_t kernel, std::size_t dilation) noexcept;

/// Copy of a CHW tensor embedded in a zero border sized for a kernel.
Tensor pad_same(const Tensor& input, const ConvSpec& spec);

/// Optional instrumentation: every scalar multiplication executed by an op
/// is added here. Zero-padding taps are executed and therefore counted.
struct MultiplyCounter {
  std::uint64_t multiplies = 0;
};

/// input C_in x H x W, weights C_out x C_in x m x r -> C_out x H x W.
Tensor conv2d_standard(const Tensor& input, const Tensor& weights, const ConvSpec& spec,
                       MultiplyCounter* counter = nullptr);

/// input C x H x W, weights C x m x r -> C x H x W; one filter per channel.
Tensor conv2d_depthwise(const Tensor& input, const Tensor& weights, const ConvSpec& spec,
                        MultiplyCounter* counter = nullptr);

/// input C_in x H x W, weights C_out x C_in -> C_out x H x W.
Tensor conv2d_pointwise(const Tensor& input, const Tensor& weights,
                        MultiplyCounter* counter = nullptr);

/// Non-overlapping VALID average pooling, stride equal to the window.
Tensor avg_pool2d(const Tensor& input, std::size_t window_h, std::size_t window_w,
                  MultiplyCounter* counter = nullptr);

/// Per-channel mean: C x H x W -> C.
Tensor global_avg_pool(const Tensor& input, MultiplyCounter* counter = nullptr);

/// Bias-free matrix-vector product: weights K x C, input C -> K.
Tensor fully_connected(const Tensor& input, const Tensor& weights,
                       MultiplyCounter* counter = nullptr);

Tensor relu(const Tensor& input);
Tensor sigmoid(const Tensor& input);
double sigmoid(double x) noexcept;

/// Softmax of a vector with max subtraction.
Tensor softmax(const Tensor& logits);

}  // namespace dsresnet
