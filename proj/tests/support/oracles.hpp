// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Brute-force reference implementations. They index the unpadded input
// with explicit bounds checks instead of building a padded copy.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>

#include "dsresnet/nn_ops.hpp"
#include "dsresnet/random.hpp"
#include "dsresnet/tensor.hpp"

namespace dsresnet::testing {

inline double tap(const Tensor& in, std::size_t c, long y, long x) {
  if (y < 0 || x < 0 || y >= static_cast<long>(in.dim(1)) || x >= static_cast<long>(in.dim(2))) {
    return 0.0;
  }
  return in.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
}

/// Leading zero rows for a "same" kernel: floor((k-1)*d / 2).
inline long low_pad(int kernel, int dilation) { return static_cast<long>((kernel - 1) * dilation / 2); }

inline Tensor oracle_standard(const Tensor& in, const Tensor& w, int dh, int dw) {
  const std::size_t ci = in.dim(0), h = in.dim(1), wd = in.dim(2);
  const std::size_t co = w.dim(0), m = w.dim(2), r = w.dim(3);
  const long ph = low_pad(static_cast<int>(m), dh), pw = low_pad(static_cast<int>(r), dw);
  Tensor out = Tensor::chw(co, h, wd);
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < wd; ++x) {
        double s = 0.0;
        for (std::size_t c = 0; c < ci; ++c)
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < r; ++j)
              s += w[((o * ci + c) * m + i) * r + j] *
                   tap(in, c, static_cast<long>(y) + static_cast<long>(i) * dh - ph,
                       static_cast<long>(x) + static_cast<long>(j) * dw - pw);
        out.at(o, y, x) = s;
      }
  return out;
}

inline Tensor oracle_depthwise(const Tensor& in, const Tensor& w, int dh, int dw) {
  const std::size_t ch = in.dim(0), h = in.dim(1), wd = in.dim(2);
  const std::size_t m = w.dim(1), r = w.dim(2);
  const long ph = low_pad(static_cast<int>(m), dh), pw = low_pad(static_cast<int>(r), dw);
  Tensor out = Tensor::chw(ch, h, wd);
  for (std::size_t c = 0; c < ch; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < wd; ++x) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < r; ++j)
            s += w[(c * m + i) * r + j] *
                 tap(in, c, static_cast<long>(y) + static_cast<long>(i) * dh - ph,
                     static_cast<long>(x) + static_cast<long>(j) * dw - pw);
        out.at(c, y, x) = s;
      }
  return out;
}

inline Tensor oracle_pointwise(const Tensor& in, const Tensor& w) {
  const std::size_t ci = in.dim(0), h = in.dim(1), wd = in.dim(2), co = w.dim(0);
  Tensor out = Tensor::chw(co, h, wd);
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < wd; ++x) {
        double s = 0.0;
        for (std::size_t c = 0; c < ci; ++c) s += w[o * ci + c] * in.at(c, y, x);
        out.at(o, y, x) = s;
      }
  return out;
}

inline Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return INFINITY;
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

/// One random convolution case: shapes, kernel, dilation.
struct ConvCase {
  std::size_t c_in, c_out, h, w;
  int m, r, dh, dw;
};

inline ConvCase random_conv_case(Rng& rng) {
  ConvCase k;
  k.c_in = 1 + rng.below(4);
  k.c_out = 1 + rng.below(4);
  k.h = 1 + rng.below(12);
  k.w = 1 + rng.below(12);
  k.m = static_cast<int>(1 + rng.below(4));
  k.r = static_cast<int>(1 + rng.below(4));
  k.dh = static_cast<int>(1 + rng.below(4));
  k.dw = static_cast<int>(1 + rng.below(4));
  return k;
}

inline ConvSpec spec_for(const ConvCase& k, ConvKind kind, std::size_t out_channels) {
  ConvSpec s;
  s.kernel_h = kind == ConvKind::kPointwise ? 1 : k.m;
  s.kernel_w = kind == ConvKind::kPointwise ? 1 : k.r;
  s.dilation_h = kind == ConvKind::kPointwise ? 1 : k.dh;
  s.dilation_w = kind == ConvKind::kPointwise ? 1 : k.dw;
  s.out_channels = static_cast<int>(out_channels);
  s.kind = kind;
  return s;
}

}  // namespace dsresnet::testing
