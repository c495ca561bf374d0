// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsresnet/nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dsresnet/errors.hpp"

namespace dsresnet {
namespace {

std::string dims(std::size_t a, std::size_t b) {
  return std::to_string(a) + " vs " + std::to_string(b);
}

void count(MultiplyCounter* counter, std::uint64_t n) {
  if (counter) counter->multiplies += n;
}

void check_kernel_weights(const Tensor& weights, const ConvSpec& spec, std::size_t first_axis,
                          const char* op) {
  if (weights.dim(first_axis) != static_cast<std::size_t>(spec.kernel_h) ||
      weights.dim(first_axis + 1) != static_cast<std::size_t>(spec.kernel_w)) {
    throw DimensionError(std::string(op) + ": kernel axes (m, r) mismatch: weights " +
                         weights.shape_string() + ", spec " + std::to_string(spec.kernel_h) +
                         "x" + std::to_string(spec.kernel_w));
  }
}

}  // namespace

void ConvSpec::validate() const {
  if (kernel_h < 1 || kernel_w < 1 || out_channels < 1 || dilation_h < 1 || dilation_w < 1) {
    throw DimensionError("conv spec: kernel, channel and dilation values must be >= 1");
  }
  if (kind == ConvKind::kPointwise &&
      (kernel_h != 1 || kernel_w != 1 || dilation_h != 1 || dilation_w != 1)) {
    throw DimensionError("conv spec: pointwise convolution requires a 1x1 kernel, dilation 1");
  }
}

SamePadding same_padding(std::size_t kernel, std::size_t dilation) noexcept {
  const std::size_t total = effective_extent(kernel, dilation) - 1;
  return {total / 2, total - total / 2};
}

Tensor pad_same(const Tensor& input, const ConvSpec& spec) {
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const SamePadding ph = same_padding(spec.kernel_h, spec.dilation_h);
  const SamePadding pw = same_padding(spec.kernel_w, spec.dilation_w);
  const std::size_t hp = h + ph.total(), wp = w + pw.total();
  Tensor out = Tensor::chw(c, hp, wp);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      const double* src = &input.at(ch, y, 0);
      std::copy(src, src + w, &out.at(ch, y + ph.low, pw.low));
    }
  }
  return out;
}

Tensor conv2d_standard(const Tensor& input, const Tensor& weights, const ConvSpec& spec,
                       MultiplyCounter* counter) {
  spec.validate();
  require_rank(input, 3, "conv2d_standard input");
  require_rank(weights, 4, "conv2d_standard weights");
  require_finite(input, "conv2d_standard");
  const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t c_out = weights.dim(0);
  if (c_out != static_cast<std::size_t>(spec.out_channels)) {
    throw DimensionError("conv2d_standard: output-channel axis mismatch: weights " +
                         dims(c_out, spec.out_channels) + " (spec)");
  }
  if (weights.dim(1) != c_in) {
    throw DimensionError("conv2d_standard: input-channel axis mismatch: weights " +
                         dims(weights.dim(1), c_in) + " (input)");
  }
  check_kernel_weights(weights, spec, 2, "conv2d_standard");

  const std::size_t m = spec.kernel_h, r = spec.kernel_w;
  const std::size_t dh = spec.dilation_h, dw = spec.dilation_w;
  const Tensor padded = pad_same(input, spec);
  Tensor out = Tensor::chw(c_out, h, w);
  for (std::size_t o = 0; o < c_out; ++o) {
    for (std::size_t c = 0; c < c_in; ++c) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < r; ++j) {
          const double k = weights[((o * c_in + c) * m + i) * r + j];
          for (std::size_t y = 0; y < h; ++y) {
            const double* src = &padded.at(c, y + i * dh, j * dw);
            double* dst = &out.at(o, y, 0);
            for (std::size_t x = 0; x < w; ++x) dst[x] += k * src[x];
          }
        }
      }
    }
  }
  count(counter, static_cast<std::uint64_t>(c_out) * c_in * m * r * h * w);
  return out;
}

Tensor conv2d_depthwise(const Tensor& input, const Tensor& weights, const ConvSpec& spec,
                        MultiplyCounter* counter) {
  spec.validate();
  require_rank(input, 3, "conv2d_depthwise input");
  require_rank(weights, 3, "conv2d_depthwise weights");
  require_finite(input, "conv2d_depthwise");
  const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (weights.dim(0) != c_in) {
    throw DimensionError("conv2d_depthwise: channel axis mismatch: weights " +
                         dims(weights.dim(0), c_in) + " (input)");
  }
  if (static_cast<std::size_t>(spec.out_channels) != c_in) {
    throw DimensionError("conv2d_depthwise: out_channels must equal input channels: " +
                         dims(spec.out_channels, c_in));
  }
  check_kernel_weights(weights, spec, 1, "conv2d_depthwise");

  const std::size_t m = spec.kernel_h, r = spec.kernel_w;
  const std::size_t dh = spec.dilation_h, dw = spec.dilation_w;
  const Tensor padded = pad_same(input, spec);
  Tensor out = Tensor::chw(c_in, h, w);
  for (std::size_t c = 0; c < c_in; ++c) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < r; ++j) {
        const double k = weights[(c * m + i) * r + j];
        for (std::size_t y = 0; y < h; ++y) {
          const double* src = &padded.at(c, y + i * dh, j * dw);
          double* dst = &out.at(c, y, 0);
          for (std::size_t x = 0; x < w; ++x) dst[x] += k * src[x];
        }
      }
    }
  }
  count(counter, static_cast<std::uint64_t>(c_in) * m * r * h * w);
  return out;
}

Tensor conv2d_pointwise(const Tensor& input, const Tensor& weights, MultiplyCounter* counter) {
  require_rank(input, 3, "conv2d_pointwise input");
  require_rank(weights, 2, "conv2d_pointwise weights");
  require_finite(input, "conv2d_pointwise");
  const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t c_out = weights.dim(0);
  if (weights.dim(1) != c_in) {
    throw DimensionError("conv2d_pointwise: input-channel axis mismatch: weights " +
                         dims(weights.dim(1), c_in) + " (input)");
  }
  const std::size_t plane = h * w;
  Tensor out = Tensor::chw(c_out, h, w);
  for (std::size_t o = 0; o < c_out; ++o) {
    double* dst = out.data() + o * plane;
    for (std::size_t c = 0; c < c_in; ++c) {
      const double k = weights[o * c_in + c];
      const double* src = input.data() + c * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] += k * src[p];
    }
  }
  count(counter, static_cast<std::uint64_t>(c_out) * c_in * plane);
  return out;
}

Tensor avg_pool2d(const Tensor& input, std::size_t window_h, std::size_t window_w,
                  MultiplyCounter* counter) {
  require_rank(input, 3, "avg_pool2d input");
  require_finite(input, "avg_pool2d");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (window_h < 1 || window_w < 1 || window_h > h || window_w > w) {
    throw DimensionError("avg_pool2d: window " + std::to_string(window_h) + "x" +
                         std::to_string(window_w) + " does not fit input " +
                         input.shape_string());
  }
  const std::size_t ho = (h - window_h) / window_h + 1;
  const std::size_t wo = (w - window_w) / window_w + 1;
  const double scale = 1.0 / static_cast<double>(window_h * window_w);
  Tensor out = Tensor::chw(c, ho, wo);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < ho; ++y) {
      for (std::size_t x = 0; x < wo; ++x) {
        double sum = 0.0;
        for (std::size_t i = 0; i < window_h; ++i) {
          for (std::size_t j = 0; j < window_w; ++j) {
            sum += input.at(ch, y * window_h + i, x * window_w + j);
          }
        }
        out.at(ch, y, x) = sum * scale;
      }
    }
  }
  count(counter, static_cast<std::uint64_t>(c) * ho * wo);
  return out;
}

Tensor global_avg_pool(const Tensor& input, MultiplyCounter* counter) {
  require_rank(input, 3, "global_avg_pool input");
  require_finite(input, "global_avg_pool");
  const std::size_t c = input.dim(0);
  const double scale = 1.0 / static_cast<double>(input.dim(1) * input.dim(2));
  Tensor out = Tensor::vector(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (double v : input.channel(ch)) sum += v;
    out[ch] = sum * scale;
  }
  count(counter, c);
  return out;
}

Tensor fully_connected(const Tensor& input, const Tensor& weights, MultiplyCounter* counter) {
  require_rank(input, 1, "fully_connected input");
  require_rank(weights, 2, "fully_connected weights");
  require_finite(input, "fully_connected");
  const std::size_t k = weights.dim(0), c = weights.dim(1);
  if (input.dim(0) != c) {
    throw DimensionError("fully_connected: input axis mismatch: weights " +
                         dims(c, input.dim(0)) + " (input)");
  }
  Tensor out = Tensor::vector(k);
  for (std::size_t o = 0; o < k; ++o) {
    double sum = 0.0;
    const double* row = weights.data() + o * c;
    for (std::size_t i = 0; i < c; ++i) sum += row[i] * input[i];
    out[o] = sum;
  }
  count(counter, static_cast<std::uint64_t>(k) * c);
  return out;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

double sigmoid(double x) noexcept {
  // Split by sign so exp never overflows.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.values()) v = sigmoid(v);
  return out;
}

Tensor softmax(const Tensor& logits) {
  require_rank(logits, 1, "softmax input");
  require_finite(logits, "softmax");
  Tensor out = logits;
  if (out.empty()) return out;
  const double peak = *std::max_element(out.values().begin(), out.values().end());
  double sum = 0.0;
  for (double& v : out.values()) {
    v = std::exp(v - peak);
    sum += v;
  }
  for (double& v : out.values()) v /= sum;
  return out;
}

}  // namespace dsresnet
